#include "wf/synthcam.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "wf/config.hpp"

namespace fs = std::filesystem;

namespace wf {

namespace {

Mat3 axis_angle(const Vec3& axis, double rad) {
    const double n = axis.norm();
    if (n < 1e-12) return Mat3::Identity();
    return Eigen::AngleAxisd(rad, axis / n).toRotationMatrix();
}

Vec3 unit_axis(int i) {
    Vec3 e = Vec3::Zero();
    e[i] = 1;
    return e;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t hash_cell(int64_t x, int64_t y, int64_t z, uint32_t seed) {
    uint64_t h = seed;
    h = splitmix64(h ^ uint64_t(x));
    h = splitmix64(h ^ uint64_t(y));
    h = splitmix64(h ^ uint64_t(z));
    return h;
}

double rand01(uint64_t h) { return double(h >> 11) * (1.0 / 9007199254740992.0); }

double smoothstep(double t) { return t * t * (3 - 2 * t); }

// lattice value noise in [0,1]
double value_noise(const Vec3& p, uint32_t seed) {
    const Vec3 f = p.array().floor();
    const int64_t ix = int64_t(f.x()), iy = int64_t(f.y()), iz = int64_t(f.z());
    const double tx = smoothstep(p.x() - f.x());
    const double ty = smoothstep(p.y() - f.y());
    const double tz = smoothstep(p.z() - f.z());
    double acc = 0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const double v = rand01(hash_cell(ix + dx, iy + dy, iz + dz, seed));
                acc += v * (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
            }
    return acc;
}

}  // namespace

double shape_sdf(const ShapeSpec& shape, const Vec3& p) {
    switch (shape.type) {
        case ShapeType::Sphere:
            return (p - shape.center).norm() - shape.radius;
        case ShapeType::Box: {
            const Vec3 q = (p - shape.center).cwiseAbs() - shape.half_extents;
            const double outside = q.cwiseMax(0.0).norm();
            const double inside = std::min(q.maxCoeff(), 0.0);
            return outside + inside;
        }
        case ShapeType::Plane:
            return shape.normal.normalized().dot(p) - shape.offset;
        case ShapeType::Cylinder: {
            const Vec3 a = shape.axis.normalized();
            const Vec3 rel = p - shape.center;
            const double y = rel.dot(a);
            const double r = (rel - y * a).norm();
            const Vec2 d(r - shape.radius, std::abs(y) - shape.half_height);
            return std::min(d.maxCoeff(), 0.0) + d.cwiseMax(0.0).norm();
        }
    }
    return 0;
}

Vec3f texture_color(const TextureSpec& tex, const Vec3& canonical) {
    const Vec3 cell = canonical / tex.scale;
    switch (tex.type) {
        case TextureType::Checker: {
            const int64_t s = int64_t(std::floor(cell.x())) + int64_t(std::floor(cell.y())) +
                              int64_t(std::floor(cell.z()));
            return (s & 1) ? Vec3f(45, 45, 45) : Vec3f(235, 235, 235);
        }
        case TextureType::Noise: {
            const float v = float(value_noise(cell, tex.seed));
            return Vec3f(40 + 180 * v, 40 + 180 * v, 40 + 180 * v);
        }
        case TextureType::Dots: {
            const Vec3 f = cell.array().floor();
            const uint64_t h = hash_cell(int64_t(f.x()), int64_t(f.y()), int64_t(f.z()),
                                         tex.seed);
            // jittered dot center within the cell, dot fully contained
            const double margin = tex.dot_radius + 0.05;
            const Vec3 jitter(margin + rand01(h) * (1 - 2 * margin),
                              margin + rand01(splitmix64(h)) * (1 - 2 * margin),
                              margin + rand01(splitmix64(splitmix64(h))) * (1 - 2 * margin));
            const Vec3 center = f + jitter;
            if ((cell - center).norm() < tex.dot_radius) {
                const uint64_t hc = splitmix64(h ^ 0xd0d5u);
                return Vec3f(20 + 160 * float(rand01(hc)),
                             20 + 160 * float(rand01(splitmix64(hc))),
                             20 + 160 * float(rand01(splitmix64(splitmix64(hc)))));
            }
            return Vec3f(210, 210, 210);
        }
    }
    return Vec3f::Zero();
}

SyntheticScene::SyntheticScene(SceneSpec spec) : spec_(std::move(spec)) {
    if (spec_.shapes.empty())
        throw std::invalid_argument("scene spec has no shapes");
    if (spec_.frames < 1) throw std::invalid_argument("scene spec: frames must be >= 1");
    if (!spec_.intrinsics.valid()) throw std::invalid_argument("scene spec: invalid intrinsics");
}

double SyntheticScene::sdf(const Vec3& canonical) const {
    double d = std::numeric_limits<double>::infinity();
    for (const ShapeSpec& s : spec_.shapes) d = std::min(d, shape_sdf(s, canonical));
    return d;
}

double SyntheticScene::warp_phase(int frame) const {
    const WarpSpec& w = spec_.warp;
    if (w.frequency > 0)
        return std::sin(2 * M_PI * w.frequency * frame / spec_.frames);
    return spec_.frames > 1 ? double(frame) / (spec_.frames - 1) : 0.0;
}

Vec3 SyntheticScene::warp(int frame, const Vec3& canonical) const {
    const WarpSpec& w = spec_.warp;
    switch (w.type) {
        case WarpType::None:
            return canonical;
        case WarpType::Rigid: {
            const Mat3 r = axis_angle(w.rotation_axis, deg2rad(w.deg_per_frame) * frame);
            return w.pivot + r * (canonical - w.pivot) + w.trans_per_frame * double(frame);
        }
        case WarpType::Bend: {
            const double a = w.amplitude * warp_phase(frame);
            const double theta = a * (canonical[w.driver_axis] - w.pivot[w.driver_axis]);
            return w.pivot + axis_angle(unit_axis(w.rot_axis), theta) * (canonical - w.pivot);
        }
        case WarpType::Twist: {
            const double rate = w.amplitude * warp_phase(frame);
            const double theta = rate * (canonical[w.driver_axis] - w.pivot[w.driver_axis]);
            return w.pivot + axis_angle(unit_axis(w.driver_axis), theta) * (canonical - w.pivot);
        }
    }
    return canonical;
}

Vec3 SyntheticScene::inverse_warp(int frame, const Vec3& world) const {
    const WarpSpec& w = spec_.warp;
    switch (w.type) {
        case WarpType::None:
            return world;
        case WarpType::Rigid: {
            const Mat3 r = axis_angle(w.rotation_axis, deg2rad(w.deg_per_frame) * frame);
            return w.pivot +
                   r.transpose() * (world - w.trans_per_frame * double(frame) - w.pivot);
        }
        case WarpType::Twist: {
            const double rate = w.amplitude * warp_phase(frame);
            const Vec3 p = world - w.pivot;
            const double theta = rate * p[w.driver_axis];  // axis coordinate is invariant
            return w.pivot + axis_angle(unit_axis(w.driver_axis), -theta) * p;
        }
        case WarpType::Bend: {
            const double a = w.amplitude * warp_phase(frame);
            const Vec3 p = world - w.pivot;
            const Vec3 e = unit_axis(w.rot_axis);
            auto g = [&](double s) {
                return (axis_angle(e, a * s).transpose() * p)[w.driver_axis] - s;
            };
            // driver coordinate of the canonical pre-image: Newton, then
            // bisection if Newton stalls (g is continuous with a sign change)
            double s = p[w.driver_axis];
            bool ok = false;
            for (int it = 0; it < 50; ++it) {
                const double gs = g(s);
                if (std::abs(gs) < 1e-12) {
                    ok = true;
                    break;
                }
                const double h = 1e-7;
                const double dg = (g(s + h) - g(s - h)) / (2 * h);
                if (std::abs(dg) < 1e-12) break;
                s -= gs / dg;
            }
            if (!ok && std::abs(g(s)) > 1e-10) {
                double lo = -(p.norm() + 1), hi = p.norm() + 1;
                for (int it = 0; it < 200; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (g(lo) * g(mid) <= 0)
                        hi = mid;
                    else
                        lo = mid;
                }
                s = 0.5 * (lo + hi);
            }
            return w.pivot + axis_angle(e, -a * s) * p;
        }
    }
    return world;
}

GlobalPose SyntheticScene::camera_pose(int frame) const {
    GlobalPose pose;
    pose.rotation =
        axis_angle(spec_.camera.rot_axis, deg2rad(spec_.camera.deg_per_frame) * frame);
    pose.translation = spec_.camera.trans_per_frame * double(frame);
    return pose;
}

void SyntheticScene::check_diffeomorphism(int frame) const {
    constexpr int kSamples = 9;
    const double h = 1e-5;
    const Vec3 span = spec_.bounds_max - spec_.bounds_min;
    for (int iz = 0; iz < kSamples; ++iz)
        for (int iy = 0; iy < kSamples; ++iy)
            for (int ix = 0; ix < kSamples; ++ix) {
                const Vec3 p = spec_.bounds_min +
                               span.cwiseProduct(Vec3(ix, iy, iz) / double(kSamples - 1));
                Mat3 j;
                for (int c = 0; c < 3; ++c) {
                    Vec3 dp = Vec3::Zero();
                    dp[c] = h;
                    j.col(c) = (warp(frame, p + dp) - warp(frame, p - dp)) / (2 * h);
                }
                if (j.determinant() <= 1e-12)
                    throw std::runtime_error("warp is not invertible at frame " +
                                             std::to_string(frame));
            }
}

Frame SyntheticScene::render_frame(int frame, Exec exec) const {
    Frame out;
    out.intrinsics = spec_.intrinsics;
    const int w = spec_.intrinsics.width, h = spec_.intrinsics.height;
    out.depth = DepthImage(w, h, 0.f);
    out.color = ColorImage(w, h, Vec3f::Zero());
    const GlobalPose pose = camera_pose(frame);

    auto field = [&](const Vec3& p_cam) {
        return sdf(inverse_warp(frame, pose.apply_inverse(p_cam)));
    };

    auto render_row = [&](int y) {
        for (int x = 0; x < w; ++x) {
            const Vec3 dir = spec_.intrinsics.backproject(x, y, 1.0).normalized();
            double t = spec_.t_min;
            double f = field(t * dir);
            if (f <= 0) continue;  // camera starts inside the surface
            double hit = -1;
            for (int it = 0; it < 2000 && t < spec_.t_max; ++it) {
                const double step = std::clamp(0.7 * f, 5e-5, 0.25);
                const double tn = t + step;
                const double fn = field(tn * dir);
                if (fn <= 1e-7) {
                    if (fn < 0) {  // bracketed: bisect to the surface
                        double lo = t, hi = tn;
                        for (int b = 0; b < 60; ++b) {
                            const double mid = 0.5 * (lo + hi);
                            if (field(mid * dir) > 0)
                                lo = mid;
                            else
                                hi = mid;
                        }
                        hit = 0.5 * (lo + hi);
                    } else {
                        hit = tn;
                    }
                    break;
                }
                t = tn;
                f = fn;
            }
            if (hit < 0) continue;
            const Vec3 p_cam = hit * dir;
            const Vec3 canonical = inverse_warp(frame, pose.apply_inverse(p_cam));
            out.depth.at(x, y) = float(p_cam.z());
            out.color.at(x, y) = color(canonical);
        }
    };

    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 4)
        for (int y = 0; y < h; ++y) render_row(y);
    } else {
        for (int y = 0; y < h; ++y) render_row(y);
    }

    if (spec_.noise_sigma > 0) {
        std::mt19937 rng(spec_.noise_seed ^ (uint32_t(frame) * 2654435761u));
        std::normal_distribution<double> gauss(0.0, spec_.noise_sigma);
        for (float& d : out.depth.data)
            if (d > 0) d = float(std::max(1e-3, double(d) + gauss(rng)));
    }
    return out;
}

namespace {

std::string vec3_str(const Vec3& v) {
    std::ostringstream os;
    os.precision(17);
    os << v.x() << ' ' << v.y() << ' ' << v.z();
    return os.str();
}

}  // namespace

std::map<std::string, std::string> SceneSpec::to_key_values() const {
    std::map<std::string, std::string> kv;
    auto num = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    kv["frames"] = std::to_string(frames);
    kv["width"] = std::to_string(intrinsics.width);
    kv["height"] = std::to_string(intrinsics.height);
    kv["fx"] = num(intrinsics.fx);
    kv["fy"] = num(intrinsics.fy);
    kv["cx"] = num(intrinsics.cx);
    kv["cy"] = num(intrinsics.cy);
    kv["t_min"] = num(t_min);
    kv["t_max"] = num(t_max);
    kv["noise.sigma"] = num(noise_sigma);
    kv["noise.seed"] = std::to_string(noise_seed);
    kv["bounds.min"] = vec3_str(bounds_min);
    kv["bounds.max"] = vec3_str(bounds_max);

    static const char* shape_names[] = {"sphere", "box", "plane", "cylinder"};
    for (size_t i = 0; i < shapes.size(); ++i) {
        const std::string p = "shape." + std::to_string(i) + ".";
        const ShapeSpec& s = shapes[i];
        kv[p + "type"] = shape_names[int(s.type)];
        kv[p + "center"] = vec3_str(s.center);
        kv[p + "radius"] = num(s.radius);
        kv[p + "half_extents"] = vec3_str(s.half_extents);
        kv[p + "normal"] = vec3_str(s.normal);
        kv[p + "offset"] = num(s.offset);
        kv[p + "axis"] = vec3_str(s.axis);
        kv[p + "half_height"] = num(s.half_height);
    }

    static const char* tex_names[] = {"checker", "noise", "dots"};
    kv["texture.type"] = tex_names[int(texture.type)];
    kv["texture.scale"] = num(texture.scale);
    kv["texture.seed"] = std::to_string(texture.seed);
    kv["texture.dot_radius"] = num(texture.dot_radius);

    static const char* warp_names[] = {"none", "rigid", "bend", "twist"};
    kv["warp.type"] = warp_names[int(warp.type)];
    kv["warp.driver_axis"] = std::to_string(warp.driver_axis);
    kv["warp.rot_axis"] = std::to_string(warp.rot_axis);
    kv["warp.amplitude"] = num(warp.amplitude);
    kv["warp.frequency"] = num(warp.frequency);
    kv["warp.pivot"] = vec3_str(warp.pivot);
    kv["warp.rotation_axis"] = vec3_str(warp.rotation_axis);
    kv["warp.deg_per_frame"] = num(warp.deg_per_frame);
    kv["warp.trans_per_frame"] = vec3_str(warp.trans_per_frame);

    kv["camera.rot_axis"] = vec3_str(camera.rot_axis);
    kv["camera.deg_per_frame"] = num(camera.deg_per_frame);
    kv["camera.trans_per_frame"] = vec3_str(camera.trans_per_frame);
    return kv;
}

SceneSpec SceneSpec::parse(const std::map<std::string, std::string>& kv) {
    SceneSpec spec;
    spec.frames = kv_int(kv, "frames", spec.frames);
    spec.intrinsics.width = kv_int(kv, "width", spec.intrinsics.width);
    spec.intrinsics.height = kv_int(kv, "height", spec.intrinsics.height);
    spec.intrinsics.fx = kv_double(kv, "fx", spec.intrinsics.fx);
    spec.intrinsics.fy = kv_double(kv, "fy", spec.intrinsics.fy);
    spec.intrinsics.cx = kv_double(kv, "cx", (spec.intrinsics.width - 1) / 2.0);
    spec.intrinsics.cy = kv_double(kv, "cy", (spec.intrinsics.height - 1) / 2.0);
    spec.t_min = kv_double(kv, "t_min", spec.t_min);
    spec.t_max = kv_double(kv, "t_max", spec.t_max);
    spec.noise_sigma = kv_double(kv, "noise.sigma", spec.noise_sigma);
    spec.noise_seed = uint32_t(kv_int(kv, "noise.seed", int(spec.noise_seed)));
    spec.bounds_min = kv_vec3(kv, "bounds.min", spec.bounds_min);
    spec.bounds_max = kv_vec3(kv, "bounds.max", spec.bounds_max);

    for (int i = 0;; ++i) {
        const std::string p = "shape." + std::to_string(i) + ".";
        const auto it = kv.find(p + "type");
        if (it == kv.end()) break;
        ShapeSpec s;
        if (it->second == "sphere")
            s.type = ShapeType::Sphere;
        else if (it->second == "box")
            s.type = ShapeType::Box;
        else if (it->second == "plane")
            s.type = ShapeType::Plane;
        else if (it->second == "cylinder")
            s.type = ShapeType::Cylinder;
        else
            throw std::runtime_error("invalid value for " + p + "type: " + it->second);
        s.center = kv_vec3(kv, p + "center", s.center);
        s.radius = kv_double(kv, p + "radius", s.radius);
        s.half_extents = kv_vec3(kv, p + "half_extents", s.half_extents);
        s.normal = kv_vec3(kv, p + "normal", s.normal);
        s.offset = kv_double(kv, p + "offset", s.offset);
        s.axis = kv_vec3(kv, p + "axis", s.axis);
        s.half_height = kv_double(kv, p + "half_height", s.half_height);
        spec.shapes.push_back(s);
    }
    if (spec.shapes.empty()) spec.shapes.push_back(ShapeSpec{});

    const std::string tex = kv_string(kv, "texture.type", "dots");
    if (tex == "checker")
        spec.texture.type = TextureType::Checker;
    else if (tex == "noise")
        spec.texture.type = TextureType::Noise;
    else if (tex == "dots")
        spec.texture.type = TextureType::Dots;
    else
        throw std::runtime_error("invalid value for texture.type: " + tex);
    spec.texture.scale = kv_double(kv, "texture.scale", spec.texture.scale);
    spec.texture.seed = uint32_t(kv_int(kv, "texture.seed", int(spec.texture.seed)));
    spec.texture.dot_radius = kv_double(kv, "texture.dot_radius", spec.texture.dot_radius);

    const std::string wt = kv_string(kv, "warp.type", "none");
    if (wt == "none")
        spec.warp.type = WarpType::None;
    else if (wt == "rigid")
        spec.warp.type = WarpType::Rigid;
    else if (wt == "bend")
        spec.warp.type = WarpType::Bend;
    else if (wt == "twist")
        spec.warp.type = WarpType::Twist;
    else
        throw std::runtime_error("invalid value for warp.type: " + wt);
    spec.warp.driver_axis = kv_int(kv, "warp.driver_axis", spec.warp.driver_axis);
    spec.warp.rot_axis = kv_int(kv, "warp.rot_axis", spec.warp.rot_axis);
    if (spec.warp.driver_axis < 0 || spec.warp.driver_axis > 2)
        throw std::runtime_error("invalid value for warp.driver_axis");
    if (spec.warp.rot_axis < 0 || spec.warp.rot_axis > 2)
        throw std::runtime_error("invalid value for warp.rot_axis");
    spec.warp.amplitude = kv_double(kv, "warp.amplitude", spec.warp.amplitude);
    spec.warp.frequency = kv_double(kv, "warp.frequency", spec.warp.frequency);
    spec.warp.pivot = kv_vec3(kv, "warp.pivot", spec.warp.pivot);
    spec.warp.rotation_axis = kv_vec3(kv, "warp.rotation_axis", spec.warp.rotation_axis);
    spec.warp.deg_per_frame = kv_double(kv, "warp.deg_per_frame", spec.warp.deg_per_frame);
    spec.warp.trans_per_frame = kv_vec3(kv, "warp.trans_per_frame", spec.warp.trans_per_frame);

    spec.camera.rot_axis = kv_vec3(kv, "camera.rot_axis", spec.camera.rot_axis);
    spec.camera.deg_per_frame = kv_double(kv, "camera.deg_per_frame", spec.camera.deg_per_frame);
    spec.camera.trans_per_frame =
        kv_vec3(kv, "camera.trans_per_frame", spec.camera.trans_per_frame);
    return spec;
}

SceneSpec SceneSpec::load(const std::string& path) {
    return parse(read_key_values(path));
}

namespace {

std::string frame_name(const char* prefix, int i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.%s", prefix, i, ext);
    return buf;
}

}  // namespace

void render_sequence(const SceneSpec& spec, const std::string& out_dir, Exec exec) {
    const SyntheticScene scene(spec);
    fs::create_directories(out_dir);

    {
        std::ofstream os(out_dir + "/camera.txt");
        os.precision(17);
        os << "fx=" << spec.intrinsics.fx << "\nfy=" << spec.intrinsics.fy
           << "\ncx=" << spec.intrinsics.cx << "\ncy=" << spec.intrinsics.cy
           << "\nwidth=" << spec.intrinsics.width << "\nheight=" << spec.intrinsics.height
           << "\nframes=" << spec.frames << "\n";
    }

    nlohmann::json truth;
    truth["spec"] = spec.to_key_values();
    truth["frames"] = nlohmann::json::array();

    constexpr int kLattice = 9;
    const Vec3 span = spec.bounds_max - spec.bounds_min;

    for (int f = 0; f < spec.frames; ++f) {
        scene.check_diffeomorphism(f);
        const Frame frame = scene.render_frame(f, exec);
        save_depth_pgm(frame.depth, out_dir + "/" + frame_name("depth", f, "pgm"));
        save_color_ppm(frame.color, out_dir + "/" + frame_name("color", f, "ppm"));

        const GlobalPose pose = scene.camera_pose(f);
        nlohmann::json jf;
        jf["index"] = f;
        jf["pose_euler"] = {matrix_to_euler(pose.rotation).x(),
                            matrix_to_euler(pose.rotation).y(),
                            matrix_to_euler(pose.rotation).z()};
        jf["pose_translation"] = {pose.translation.x(), pose.translation.y(),
                                  pose.translation.z()};
        jf["warp_phase"] = scene.warp_phase(f);
        truth["frames"].push_back(jf);

        // forward-warped lattice samples over the scene bounds
        std::ofstream ws(out_dir + "/" + frame_name("warp", f, "bin"), std::ios::binary);
        const int32_t n = kLattice;
        ws.write(reinterpret_cast<const char*>(&n), 4);
        double bounds[6] = {spec.bounds_min.x(), spec.bounds_min.y(), spec.bounds_min.z(),
                            spec.bounds_max.x(), spec.bounds_max.y(), spec.bounds_max.z()};
        ws.write(reinterpret_cast<const char*>(bounds), sizeof(bounds));
        for (int iz = 0; iz < kLattice; ++iz)
            for (int iy = 0; iy < kLattice; ++iy)
                for (int ix = 0; ix < kLattice; ++ix) {
                    const Vec3 p = spec.bounds_min +
                                   span.cwiseProduct(Vec3(ix, iy, iz) / double(kLattice - 1));
                    const Vec3 wpt = scene.warp(f, p);
                    double buf[3] = {wpt.x(), wpt.y(), wpt.z()};
                    ws.write(reinterpret_cast<const char*>(buf), sizeof(buf));
                }
    }

    std::ofstream ts(out_dir + "/truth.json");
    ts << truth.dump(1) << "\n";
}

std::vector<int> frame_skip_indices(int frame_count, int n) {
    if (n < 1) throw std::invalid_argument("frame skip must be >= 1");
    std::vector<int> out;
    for (int i = 0; i < frame_count; i += n) out.push_back(i);
    return out;
}

DistanceMetrics evaluate_reconstruction(const std::vector<Vec3>& canonical_vertices,
                                        const SyntheticScene& scene) {
    if (canonical_vertices.empty())
        throw std::runtime_error("evaluation failed: empty mesh");
    DistanceMetrics m;
    double sum = 0, sum2 = 0;
    for (const Vec3& v : canonical_vertices) {
        const double d = std::abs(scene.sdf(v));
        sum += d;
        sum2 += d * d;
        m.max = std::max(m.max, d);
    }
    m.count = int(canonical_vertices.size());
    m.mean = sum / m.count;
    m.rms = std::sqrt(sum2 / m.count);
    return m;
}

}  // namespace wf
