#include "wf/features.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

namespace wf {

namespace {

GrayImage gaussian_blur(const GrayImage& in, double sigma) {
    if (sigma <= 0) return in;
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    float sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = float(std::exp(-0.5 * i * i / (sigma * sigma)));
        sum += kernel[i + radius];
    }
    for (float& k : kernel) k /= sum;

    GrayImage tmp(in.width, in.height), out(in.width, in.height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            float acc = 0;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = std::clamp(x + i, 0, in.width - 1);
                acc += kernel[i + radius] * in.at(xx, y);
            }
            tmp.at(x, y) = acc;
        }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            float acc = 0;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = std::clamp(y + i, 0, in.height - 1);
                acc += kernel[i + radius] * tmp.at(x, yy);
            }
            out.at(x, y) = acc;
        }
    return out;
}

GrayImage downsample2(const GrayImage& in) {
    GrayImage out(in.width / 2, in.height / 2);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.at(x, y) = in.at(2 * x, 2 * y);
    return out;
}

}  // namespace

DogPyramid build_pyramid(const GrayImage& gray, const FeatureParams& params) {
    if (gray.width < 64 || gray.height < 64)
        throw std::invalid_argument("build_pyramid: image must be at least 64x64");
    DogPyramid pyr;
    pyr.octaves = params.octaves;
    pyr.dog_levels = params.dog_levels;
    pyr.sigma0 = params.sigma0;
    const double k = std::pow(2.0, 1.0 / params.dog_levels);

    GrayImage base = gray;
    for (int o = 0; o < params.octaves; ++o) {
        std::vector<GrayImage> gauss;
        gauss.push_back(gaussian_blur(base, params.sigma0));
        for (int l = 1; l <= params.dog_levels; ++l) {
            const double s_prev = params.sigma0 * std::pow(k, l - 1);
            const double s_cur = params.sigma0 * std::pow(k, l);
            const double s_delta = std::sqrt(s_cur * s_cur - s_prev * s_prev);
            gauss.push_back(gaussian_blur(gauss.back(), s_delta));
        }
        std::vector<GrayImage> dog;
        for (int l = 0; l < params.dog_levels; ++l) {
            GrayImage d(gauss[l].width, gauss[l].height);
            for (size_t i = 0; i < d.data.size(); ++i)
                d.data[i] = gauss[l + 1].data[i] - gauss[l].data[i];
            dog.push_back(std::move(d));
        }
        if (o + 1 < params.octaves) base = downsample2(gauss[params.dog_levels]);
        pyr.gauss.push_back(std::move(gauss));
        pyr.dog.push_back(std::move(dog));
    }
    return pyr;
}

namespace {

// Dominant gradient orientations from a 36-bin histogram around the keypoint.
std::vector<double> dominant_orientations(const GrayImage& img, double x, double y,
                                          double sigma, const FeatureParams& params) {
    constexpr int kBins = 36;
    double hist[kBins] = {0};
    const double win_sigma = 1.5 * sigma;
    const int radius = std::max(1, int(std::lround(3.0 * win_sigma)));
    const int cx = int(std::lround(x)), cy = int(std::lround(y));
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            const int px = cx + dx, py = cy + dy;
            if (px < 1 || py < 1 || px >= img.width - 1 || py >= img.height - 1) continue;
            const double gx = img.at(px + 1, py) - img.at(px - 1, py);
            const double gy = img.at(px, py + 1) - img.at(px, py - 1);
            const double mag = std::hypot(gx, gy);
            const double theta = std::atan2(gy, gx);
            const double w = std::exp(-0.5 * (dx * dx + dy * dy) / (win_sigma * win_sigma));
            int bin = int(std::floor((theta + M_PI) / (2 * M_PI) * kBins));
            bin = std::clamp(bin, 0, kBins - 1);
            hist[bin] += w * mag;
        }
    double peak = *std::max_element(hist, hist + kBins);
    if (peak <= 0) return {};
    std::vector<std::pair<double, double>> cands;  // (value, angle)
    for (int b = 0; b < kBins; ++b) {
        const double l = hist[(b + kBins - 1) % kBins], r = hist[(b + 1) % kBins];
        if (hist[b] >= params.orientation_peak_ratio * peak && hist[b] > l && hist[b] > r) {
            // parabolic refinement of the peak bin
            const double denom = l - 2 * hist[b] + r;
            const double off = std::abs(denom) > 1e-12 ? 0.5 * (l - r) / denom : 0.0;
            const double angle = (b + 0.5 + off) / kBins * 2 * M_PI - M_PI;
            cands.emplace_back(hist[b], angle);
        }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<double> out;
    for (const auto& [v, a] : cands) {
        out.push_back(a);
        if (int(out.size()) >= params.max_orientations) break;
    }
    return out;
}

}  // namespace

std::vector<Keypoint> detect_keypoints(const DogPyramid& pyramid, const DepthImage& depth,
                                       const FeatureParams& params) {
    struct Extremum {
        int octave;
        int x, y;
        float response;
    };
    std::vector<Extremum> extrema;
    const double k = std::pow(2.0, 1.0 / pyramid.dog_levels);
    const double edge_limit =
        (params.edge_ratio + 1) * (params.edge_ratio + 1) / params.edge_ratio;

    for (int o = 0; o < pyramid.octaves; ++o) {
        const auto& dog = pyramid.dog[o];
        const int w = dog[0].width, h = dog[0].height;
        const int scale = 1 << o;
        for (int l = 1; l + 1 < pyramid.dog_levels; ++l) {
            const GrayImage& d = dog[l];
            for (int y = 1; y < h - 1; ++y)
                for (int x = 1; x < w - 1; ++x) {
                    const float v = d.at(x, y);
                    if (std::abs(v) < params.contrast_threshold) continue;
                    bool is_max = true, is_min = true;
                    for (int dl = -1; dl <= 1 && (is_max || is_min); ++dl)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                if (dl == 0 && dx == 0 && dy == 0) continue;
                                const float nv = dog[l + dl].at(x + dx, y + dy);
                                if (nv >= v) is_max = false;
                                if (nv <= v) is_min = false;
                            }
                    if (!is_max && !is_min) continue;
                    // reject edge responses via the 2x2 Hessian
                    const double dxx = d.at(x + 1, y) + d.at(x - 1, y) - 2 * v;
                    const double dyy = d.at(x, y + 1) + d.at(x, y - 1) - 2 * v;
                    const double dxy = 0.25 * (d.at(x + 1, y + 1) - d.at(x - 1, y + 1) -
                                               d.at(x + 1, y - 1) + d.at(x - 1, y - 1));
                    const double tr = dxx + dyy, det = dxx * dyy - dxy * dxy;
                    if (det <= 0 || tr * tr / det >= edge_limit) continue;
                    // only extrema with a valid depth can be lifted to 3D
                    const int fx = x * scale, fy = y * scale;
                    if (!depth.inside(fx, fy) || depth.at(fx, fy) <= 0.f) continue;
                    extrema.push_back({o, x, y, v});
                }
        }
    }
    std::stable_sort(extrema.begin(), extrema.end(), [](const Extremum& a, const Extremum& b) {
        return std::abs(a.response) > std::abs(b.response);
    });

    std::vector<Keypoint> keypoints;
    for (const Extremum& e : extrema) {
        if (int(keypoints.size()) >= params.max_keypoints) break;
        const double sigma_oct = pyramid.sigma0 * std::pow(k, 1.5);
        const GrayImage& g = pyramid.gauss[e.octave][1];
        const auto orientations = dominant_orientations(g, e.x, e.y, sigma_oct, params);
        const int scale = 1 << e.octave;
        for (double theta : orientations) {
            if (int(keypoints.size()) >= params.max_keypoints) break;
            Keypoint kp;
            kp.octave = e.octave;
            kp.octave_pixel = Vec2(e.x, e.y);
            kp.pixel = Vec2(e.x * scale, e.y * scale);
            kp.scale = sigma_oct * scale;
            kp.orientation = theta;
            kp.response = e.response;
            keypoints.push_back(kp);
        }
    }
    return keypoints;
}

std::vector<Feature> extract_descriptors(const std::vector<Keypoint>& keypoints,
                                         const DogPyramid& pyramid,
                                         const FeatureParams& params) {
    constexpr int kCells = 4, kOriBins = 8;
    std::vector<Feature> out;
    const double kfac = std::pow(2.0, 1.0 / pyramid.dog_levels);
    for (const Keypoint& kp : keypoints) {
        const GrayImage& img = pyramid.gauss[kp.octave][1];
        const double sigma_oct = pyramid.sigma0 * std::pow(kfac, 1.5);
        const double cell = 3.0 * sigma_oct;
        const double radius = cell * (kCells + 1) * std::sqrt(2.0) * 0.5;
        const double cx = kp.octave_pixel.x(), cy = kp.octave_pixel.y();
        if (cx - radius < 1 || cy - radius < 1 || cx + radius >= img.width - 1 ||
            cy + radius >= img.height - 1)
            continue;  // window leaves the image

        const double ct = std::cos(kp.orientation), st = std::sin(kp.orientation);
        double hist[kCells][kCells][kOriBins] = {};
        const int r = int(std::ceil(radius));
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                // rotate into the keypoint frame, units of descriptor cells
                const double rx = (ct * dx + st * dy) / cell;
                const double ry = (-st * dx + ct * dy) / cell;
                const double bx = rx + kCells / 2.0 - 0.5;
                const double by = ry + kCells / 2.0 - 0.5;
                if (bx <= -1 || by <= -1 || bx >= kCells || by >= kCells) continue;
                const int px = int(std::lround(cx)) + dx;
                const int py = int(std::lround(cy)) + dy;
                const double gx = img.at(px + 1, py) - img.at(px - 1, py);
                const double gy = img.at(px, py + 1) - img.at(px, py - 1);
                const double mag = std::hypot(gx, gy);
                double theta = std::atan2(gy, gx) - kp.orientation;
                while (theta < 0) theta += 2 * M_PI;
                while (theta >= 2 * M_PI) theta -= 2 * M_PI;
                const double ob = theta / (2 * M_PI) * kOriBins;
                const double w =
                    mag * std::exp(-0.5 * (rx * rx + ry * ry) / ((kCells / 2.0) * (kCells / 2.0)));
                // trilinear binning over (cell x, cell y, orientation)
                const int x0 = int(std::floor(bx)), y0 = int(std::floor(by));
                const int o0 = int(std::floor(ob)) % kOriBins;
                const double fx = bx - std::floor(bx), fy = by - std::floor(by);
                const double fo = ob - std::floor(ob);
                for (int ix = 0; ix < 2; ++ix)
                    for (int iy = 0; iy < 2; ++iy)
                        for (int io = 0; io < 2; ++io) {
                            const int xx = x0 + ix, yy = y0 + iy;
                            if (xx < 0 || yy < 0 || xx >= kCells || yy >= kCells) continue;
                            const int oo = (o0 + io) % kOriBins;
                            hist[yy][xx][oo] += w * (ix ? fx : 1 - fx) * (iy ? fy : 1 - fy) *
                                                (io ? fo : 1 - fo);
                        }
            }

        Feature f;
        f.pixel = kp.pixel;
        f.scale = kp.scale;
        f.orientation = kp.orientation;
        int n = 0;
        double norm = 0;
        for (int yy = 0; yy < kCells; ++yy)
            for (int xx = 0; xx < kCells; ++xx)
                for (int oo = 0; oo < kOriBins; ++oo) {
                    f.descriptor[n] = float(hist[yy][xx][oo]);
                    norm += f.descriptor[n] * f.descriptor[n];
                    ++n;
                }
        norm = std::sqrt(norm);
        if (norm < 1e-12) continue;  // flat patch
        double norm2 = 0;
        for (float& v : f.descriptor) {
            v = std::min(v / float(norm), 0.2f);
            norm2 += v * v;
        }
        norm2 = std::sqrt(norm2);
        for (float& v : f.descriptor) v = float(v / norm2);
        out.push_back(f);
    }
    return out;
}

double descriptor_distance(const std::array<float, 128>& a, const std::array<float, 128>& b) {
    double s = 0;
    for (int i = 0; i < 128; ++i) {
        const double d = double(a[i]) - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::vector<int> FeatureStore::frame_ids() const {
    std::vector<int> ids;
    for (const Feature& f : features_)
        if (ids.empty() || ids.back() != f.frame_id) ids.push_back(f.frame_id);
    return ids;
}

void FeatureStore::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    const char magic[8] = {'W', 'F', 'F', 'E', 'A', 'T', '1', '\n'};
    os.write(magic, 8);
    const int32_t n = size();
    os.write(reinterpret_cast<const char*>(&n), 4);
    for (const Feature& f : features_) {
        double buf[10] = {f.canonical_pos.x(), f.canonical_pos.y(), f.canonical_pos.z(),
                          f.world_pos.x(),     f.world_pos.y(),     f.world_pos.z(),
                          f.pixel.x(),         f.pixel.y(),         f.scale,
                          f.orientation};
        os.write(reinterpret_cast<const char*>(buf), sizeof(buf));
        os.write(reinterpret_cast<const char*>(f.descriptor.data()), 128 * sizeof(float));
        const int32_t fid = f.frame_id;
        os.write(reinterpret_cast<const char*>(&fid), 4);
    }
}

FeatureStore FeatureStore::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::memcmp(magic, "WFFEAT1\n", 8) != 0)
        throw std::runtime_error("bad feature store header: " + path);
    int32_t n;
    is.read(reinterpret_cast<char*>(&n), 4);
    FeatureStore store;
    for (int i = 0; i < n; ++i) {
        Feature f;
        double buf[10];
        is.read(reinterpret_cast<char*>(buf), sizeof(buf));
        f.canonical_pos = Vec3(buf[0], buf[1], buf[2]);
        f.world_pos = Vec3(buf[3], buf[4], buf[5]);
        f.pixel = Vec2(buf[6], buf[7]);
        f.scale = buf[8];
        f.orientation = buf[9];
        is.read(reinterpret_cast<char*>(f.descriptor.data()), 128 * sizeof(float));
        int32_t fid;
        is.read(reinterpret_cast<char*>(&fid), 4);
        f.frame_id = fid;
        store.add(f);
    }
    if (!is) throw std::runtime_error("truncated feature store: " + path);
    return store;
}

std::vector<FeatureMatch> match_frame_pair(
    const std::vector<Feature>& current, const FeatureStore& store,
    const std::vector<int>& history_ids, const std::vector<Vec3>& history_predicted_world,
    const Intrinsics& intrinsics, const FeatureParams& params) {
    const int nc = int(current.size());
    const int nh = int(history_ids.size());
    std::vector<FeatureMatch> result;
    if (nc == 0 || nh == 0) return result;

    // exhaustive distances, best in both directions
    std::vector<int> best_for_hist(nh, -1);
    std::vector<double> best_dist_hist(nh, std::numeric_limits<double>::infinity());
    std::vector<int> best_for_cur(nc, -1);
    std::vector<double> best_dist_cur(nc, std::numeric_limits<double>::infinity());
    for (int h = 0; h < nh; ++h) {
        const Feature& fh = store[history_ids[h]];
        for (int c = 0; c < nc; ++c) {
            const double d = descriptor_distance(fh.descriptor, current[c].descriptor);
            if (d < best_dist_hist[h]) {
                best_dist_hist[h] = d;
                best_for_hist[h] = c;
            }
            if (d < best_dist_cur[c]) {
                best_dist_cur[c] = d;
                best_for_cur[c] = h;
            }
        }
    }
    std::vector<FeatureMatch> candidates;
    for (int h = 0; h < nh; ++h) {
        const int c = best_for_hist[h];
        if (c >= 0 && best_for_cur[c] == h) {
            candidates.push_back({history_ids[h], c, best_dist_hist[h]});
            if (int(candidates.size()) >= params.max_candidates) break;
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const FeatureMatch& a, const FeatureMatch& b) {
                         return a.distance != b.distance ? a.distance < b.distance
                                                         : a.source_id < b.source_id;
                     });
    if (int(candidates.size()) > params.keep_best) candidates.resize(params.keep_best);

    for (const FeatureMatch& m : candidates) {
        if (m.distance > params.tau_descriptor) continue;
        // locate the predicted world position of the history feature
        int hidx = -1;
        for (int h = 0; h < nh; ++h)
            if (history_ids[h] == m.source_id) {
                hidx = h;
                break;
            }
        const Vec3& predicted = history_predicted_world[hidx];
        if (predicted.z() <= 0) continue;
        const Vec2 uv = intrinsics.project(predicted);
        if ((uv - current[m.target_id].pixel).norm() > params.tau_pixels) continue;
        if ((predicted - current[m.target_id].world_pos).norm() > params.tau_3d) continue;
        result.push_back(m);
    }
    return result;
}

std::vector<FeatureMatch> match_features(const std::vector<Feature>& current,
                                         const FeatureStore& store,
                                         const std::vector<Vec3>& predicted_world,
                                         const Intrinsics& intrinsics,
                                         const FeatureParams& params) {
    // group history by frame id
    std::map<int, std::vector<int>> by_frame;
    for (int i = 0; i < store.size(); ++i) by_frame[store[i].frame_id].push_back(i);
    std::vector<FeatureMatch> all;
    for (const auto& [fid, ids] : by_frame) {
        std::vector<Vec3> predicted(ids.size());
        for (size_t k = 0; k < ids.size(); ++k) predicted[k] = predicted_world[ids[k]];
        auto matches = match_frame_pair(current, store, ids, predicted, intrinsics, params);
        all.insert(all.end(), matches.begin(), matches.end());
    }
    return all;
}

void write_keypoint_overlay(const GrayImage& gray, const std::vector<Keypoint>& keypoints,
                            const std::string& path) {
    ColorImage img(gray.width, gray.height);
    for (size_t i = 0; i < gray.data.size(); ++i) {
        const float v = std::clamp(gray.data[i] * 255.f, 0.f, 255.f);
        img.data[i] = Vec3f(v, v, v);
    }
    for (const Keypoint& kp : keypoints) {
        const int cx = int(std::lround(kp.pixel.x()));
        const int cy = int(std::lround(kp.pixel.y()));
        const int r = std::max(2, int(std::lround(kp.scale)));
        for (int d = -r; d <= r; ++d) {
            if (img.inside(cx + d, cy)) img.at(cx + d, cy) = Vec3f(255, 0, 0);
            if (img.inside(cx, cy + d)) img.at(cx, cy + d) = Vec3f(255, 0, 0);
        }
    }
    save_color_ppm(img, path);
}

}  // namespace wf
