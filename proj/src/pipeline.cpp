#include "wf/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "json.hpp"
#include "wf/correspond.hpp"

namespace fs = std::filesystem;

namespace wf {

namespace {

// numeric stem: value of the last digit run in the file name, -1 if none
int numeric_stem(const std::string& name) {
    int end = -1;
    for (int i = int(name.size()) - 1; i >= 0; --i)
        if (std::isdigit(static_cast<unsigned char>(name[i]))) {
            end = i;
            break;
        }
    if (end < 0) return -1;
    int begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(name[begin - 1]))) --begin;
    return std::stoi(name.substr(begin, end - begin + 1));
}

}  // namespace

std::vector<FrameFiles> scan_frame_directory(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::map<int, FrameFiles> by_index;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        const std::string ext = entry.path().extension().string();
        const int idx = numeric_stem(entry.path().stem().string());
        if (idx < 0) continue;
        if (ext == ".pgm") {
            by_index[idx].index = idx;
            by_index[idx].depth_path = entry.path().string();
        } else if (ext == ".ppm") {
            by_index[idx].index = idx;
            by_index[idx].color_path = entry.path().string();
        }
    }
    std::vector<FrameFiles> frames;
    for (const auto& [idx, f] : by_index)
        if (!f.depth_path.empty()) frames.push_back(f);
    if (frames.empty()) throw std::runtime_error("no depth frames found in " + dir);
    return frames;
}

Intrinsics load_camera_file(const std::string& path) {
    const auto kv = read_key_values(path);
    Intrinsics intr;
    intr.fx = kv_double(kv, "fx", 0);
    intr.fy = kv_double(kv, "fy", 0);
    intr.cx = kv_double(kv, "cx", 0);
    intr.cy = kv_double(kv, "cy", 0);
    intr.width = kv_int(kv, "width", 0);
    intr.height = kv_int(kv, "height", 0);
    if (!intr.valid()) throw std::runtime_error("invalid intrinsics in " + path);
    return intr;
}

Frame load_frame(const FrameFiles& files, const Intrinsics& intrinsics) {
    Frame frame;
    frame.intrinsics = intrinsics;
    frame.depth = load_depth_pgm(files.depth_path);
    if (frame.depth.width != intrinsics.width || frame.depth.height != intrinsics.height)
        throw std::runtime_error("depth size mismatch: " + files.depth_path);
    if (!files.color_path.empty()) {
        frame.color = load_color_ppm(files.color_path);
        if (frame.color.width != intrinsics.width || frame.color.height != intrinsics.height)
            throw std::runtime_error("color size mismatch: " + files.color_path);
    }
    return frame;
}

Reconstructor::Reconstructor(const ReconstructionConfig& config)
    : cfg_(config),
      volume_(config.volume_dims, config.voxel_size, config.volume_origin) {}

SurfaceMesh Reconstructor::canonical_mesh() const {
    SurfaceMesh mesh = extract_mesh(volume_, GlobalPose{});
    compute_normals(mesh);
    return mesh;
}

int Reconstructor::add_features(const Frame& frame, const PointNormalMap& maps,
                                int frame_index, const GeometryBuffer* buffer) {
    if (frame.color.empty()) return 0;
    const GrayImage gray = to_gray(frame.color);
    if (gray.width < 64 || gray.height < 64) return 0;
    const DogPyramid pyramid = build_pyramid(gray, cfg_.features);
    const auto keypoints = detect_keypoints(pyramid, frame.depth, cfg_.features);
    auto features = extract_descriptors(keypoints, pyramid, cfg_.features);

    int added = 0;
    for (Feature& f : features) {
        const int px = int(std::lround(f.pixel.x()));
        const int py = int(std::lround(f.pixel.y()));
        if (!frame.depth.inside(px, py)) continue;
        const size_t idx = maps.idx(px, py);
        if (!maps.point_valid[idx]) continue;
        f.world_pos = maps.point[idx];

        if (buffer == nullptr) {
            // bootstrap frame: warp is the identity
            f.canonical_pos = f.world_pos;
        } else {
            // seed the warp inversion from a nearby rasterized canonical point
            Vec3 seed;
            bool have_seed = false;
            for (int r = 0; r <= 4 && !have_seed; ++r)
                for (int dy = -r; dy <= r && !have_seed; ++dy)
                    for (int dx = -r; dx <= r && !have_seed; ++dx) {
                        const int sx = px + dx, sy = py + dy;
                        if (sx < 0 || sy < 0 || sx >= buffer->width || sy >= buffer->height)
                            continue;
                        if (!buffer->valid(sx, sy)) continue;
                        seed = buffer->canonical[buffer->idx(sx, sy)];
                        have_seed = true;
                    }
            if (!have_seed) continue;
            const auto canonical = volume_.invert_warp(pose_, f.world_pos, seed);
            if (!canonical || !volume_.contains(*canonical)) continue;
            f.canonical_pos = *canonical;
        }
        if (!volume_.contains(f.canonical_pos)) continue;
        f.frame_id = frame_index;
        store_.add(f);
        ++added;
    }
    return added;
}

FrameRecord Reconstructor::process_frame(const Frame& frame, int frame_index) {
    FrameRecord rec;
    rec.index = frame_index;
    if (!frame.intrinsics.valid()) throw std::runtime_error("frame has invalid intrinsics");
    const Exec exec = cfg_.solver.exec;
    const PointNormalMap maps = backproject_depth(frame, exec);

    if (frames_processed_ == 0) {
        FusionParams boot = cfg_.fusion;
        boot.bootstrap = true;
        rec.fusion = integrate_frame(volume_, frame, pose_, boot, exec);
        compute_active_set(volume_);
        if (cfg_.use_features) rec.features_added = add_features(frame, maps, frame_index, nullptr);
        rec.pose = pose_;
        ++frames_processed_;
        return rec;
    }

    SurfaceMesh mesh = extract_mesh(volume_, pose_);
    if (mesh.empty()) throw std::runtime_error("empty isosurface before frame " +
                                               std::to_string(frame_index));
    compute_normals(mesh);
    GeometryBuffer buffer = rasterize(mesh, frame.intrinsics, exec);

    auto redeform = [&]() {
        for (size_t i = 0; i < mesh.num_vertices(); ++i)
            mesh.vertices_deformed[i] = volume_.warp_point(pose_, mesh.vertices_canonical[i]);
        compute_normals(mesh);
        buffer = rasterize(mesh, frame.intrinsics, exec);
    };

    if (cfg_.estimate_pose) {
        IcpParams icp_params = cfg_.icp;
        icp_params.corr = cfg_.correspond;
        const IcpResult icp =
            estimate_global_pose(buffer, maps, frame.intrinsics, volume_, pose_, icp_params);
        rec.icp_degraded = icp.degraded;
        rec.icp_rms = icp.rms;
        pose_ = icp.pose;
        redeform();
    }

    // sparse feature constraints against the full history
    std::vector<Correspondence> sparse;
    std::vector<Feature> current;
    if (cfg_.use_features && !frame.color.empty()) {
        const GrayImage gray = to_gray(frame.color);
        if (gray.width >= 64 && gray.height >= 64) {
            const DogPyramid pyramid = build_pyramid(gray, cfg_.features);
            const auto keypoints = detect_keypoints(pyramid, frame.depth, cfg_.features);
            current = extract_descriptors(keypoints, pyramid, cfg_.features);
            for (Feature& f : current) {
                const int px = int(std::lround(f.pixel.x()));
                const int py = int(std::lround(f.pixel.y()));
                if (frame.depth.inside(px, py) && maps.point_valid[maps.idx(px, py)])
                    f.world_pos = maps.point[maps.idx(px, py)];
                else
                    f.world_pos = Vec3(0, 0, -1);  // invalid, pruned by matching
            }
            std::vector<Vec3> predicted(store_.size(), Vec3(0, 0, -1));
            for (int i = 0; i < store_.size(); ++i) {
                const Vec3& c = store_[i].canonical_pos;
                if (volume_.contains(c)) predicted[i] = volume_.warp_point(pose_, c);
            }
            const auto matches =
                match_features(current, store_, predicted, frame.intrinsics, cfg_.features);
            rec.match_count = int(matches.size());
            std::vector<FeatureConstraintInput> inputs;
            for (const FeatureMatch& m : matches) {
                if (current[m.target_id].world_pos.z() <= 0) continue;
                inputs.push_back(
                    {store_[m.source_id].canonical_pos, current[m.target_id].world_pos});
            }
            sparse = sparse_to_constraints(inputs, volume_);
        }
    }

    auto all_anchors_active = [&](const Correspondence& c) {
        for (int a : c.anchor_index)
            if (!volume_.active(a)) return false;
        return true;
    };

    for (int outer = 0; outer < cfg_.reassociations; ++outer) {
        auto constraints =
            find_dense_correspondences(buffer, maps, frame.intrinsics, cfg_.correspond, volume_);
        std::erase_if(constraints, [&](const Correspondence& c) { return !all_anchors_active(c); });
        rec.dense_count = int(constraints.size());
        int kept_sparse = 0;
        for (const Correspondence& c : sparse)
            if (all_anchors_active(c)) {
                constraints.push_back(c);
                ++kept_sparse;
            }
        rec.sparse_count = kept_sparse;
        if (constraints.empty()) break;

        auto trace = solve_coarse_to_fine(volume_, pose_, constraints, cfg_.solver);
        for (const EnergyTraceEntry& e : trace) {
            if (e.anomaly) ++rec.anomalies;
            rec.trace.push_back(e);
        }
        if (!trace.empty()) rec.energy = trace.back().energy;
        redeform();
    }

    std::vector<int> solved;
    for (int i = 0; i < volume_.num_points(); ++i)
        if (volume_.active(i)) solved.push_back(i);
    advance_ages(volume_, solved);

    rec.fusion = integrate_frame(volume_, frame, pose_, cfg_.fusion, exec);
    rec.expansion = expand_grid(volume_);

    if (cfg_.use_features) rec.features_added = add_features(frame, maps, frame_index, &buffer);

    rec.pose = pose_;
    ++frames_processed_;
    return rec;
}

namespace {

nlohmann::json pose_json(const GlobalPose& pose) {
    const Vec3 e = matrix_to_euler(pose.rotation);
    return {{"euler", {e.x(), e.y(), e.z()}},
            {"translation", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

/// Canonical surface samples of the analytic scene for drift tracking.
std::vector<Vec3> sample_truth_surface(const SyntheticScene& scene, int max_samples) {
    std::vector<Vec3> samples;
    const Vec3& lo = scene.spec().bounds_min;
    const Vec3 span = scene.spec().bounds_max - lo;
    constexpr int kLattice = 17;
    for (int iz = 0; iz < kLattice && int(samples.size()) < max_samples; ++iz)
        for (int iy = 0; iy < kLattice && int(samples.size()) < max_samples; ++iy)
            for (int ix = 0; ix < kLattice && int(samples.size()) < max_samples; ++ix) {
                Vec3 p = lo + span.cwiseProduct(Vec3(ix, iy, iz) / double(kLattice - 1));
                if (std::abs(scene.sdf(p)) > 0.5 * span.norm()) continue;
                // project to the zero level set along the numeric gradient
                bool ok = false;
                for (int it = 0; it < 30; ++it) {
                    const double d = scene.sdf(p);
                    if (std::abs(d) < 1e-9) {
                        ok = true;
                        break;
                    }
                    const double h = 1e-6;
                    Vec3 g;
                    for (int c = 0; c < 3; ++c) {
                        Vec3 dp = Vec3::Zero();
                        dp[c] = h;
                        g[c] = (scene.sdf(p + dp) - scene.sdf(p - dp)) / (2 * h);
                    }
                    const double gn = g.norm();
                    if (gn < 1e-9) break;
                    p -= d * g / (gn * gn);
                }
                if (ok) samples.push_back(p);
            }
    return samples;
}

}  // namespace

void run_reconstruct(const RunOptions& options) {
    ReconstructionConfig cfg = options.config_path.empty()
                                   ? ReconstructionConfig{}
                                   : ReconstructionConfig::load(options.config_path);
    cfg.print(std::cout);

    const Intrinsics intrinsics = load_camera_file(options.input_dir + "/camera.txt");
    auto all_frames = scan_frame_directory(options.input_dir);
    const auto keep = frame_skip_indices(int(all_frames.size()), cfg.frame_skip);
    std::vector<FrameFiles> frames;
    for (int i : keep) frames.push_back(all_frames[i]);
    if (cfg.max_frames > 0 && int(frames.size()) > cfg.max_frames)
        frames.resize(cfg.max_frames);
    if (frames.empty()) throw std::runtime_error("no frames selected");

    fs::create_directories(options.output_dir);
    std::ofstream metrics(options.output_dir + "/metrics.jsonl");
    std::ofstream energy(options.output_dir + "/energy.jsonl");

    // optional ground-truth drift tracking
    std::unique_ptr<SyntheticScene> scene;
    std::vector<Vec3> drift_pts;
    std::vector<Vec3> drift_ref, drift_last;
    std::vector<uint8_t> drift_has_ref;
    if (fs::exists(options.input_dir + "/truth.json")) {
        std::ifstream ts(options.input_dir + "/truth.json");
        nlohmann::json truth;
        ts >> truth;
        const auto kv = truth["spec"].get<std::map<std::string, std::string>>();
        scene = std::make_unique<SyntheticScene>(SceneSpec::parse(kv));
        drift_pts = sample_truth_surface(*scene, 200);
        drift_ref.resize(drift_pts.size());
        drift_last = drift_pts;
        drift_has_ref.assign(drift_pts.size(), 0);
    }

    Reconstructor recon(cfg);
    double drift_sum = 0;
    long drift_count = 0;
    for (const FrameFiles& ff : frames) {
        Frame frame;
        try {
            frame = load_frame(ff, intrinsics);
        } catch (const std::exception& e) {
            throw std::runtime_error("frame " + std::to_string(ff.index) + ": " + e.what());
        }
        const FrameRecord rec = recon.process_frame(frame, ff.index);

        double frame_drift = 0;
        int frame_drift_n = 0;
        if (scene) {
            const GlobalPose gt_pose = scene->camera_pose(ff.index);
            for (size_t k = 0; k < drift_pts.size(); ++k) {
                const Vec3 y = gt_pose.apply(scene->warp(ff.index, drift_pts[k]));
                const auto c = recon.volume().invert_warp(recon.pose(), y, drift_last[k]);
                if (!c) continue;
                drift_last[k] = *c;
                if (!drift_has_ref[k]) {
                    drift_ref[k] = *c;
                    drift_has_ref[k] = 1;
                } else {
                    frame_drift += (*c - drift_ref[k]).norm();
                    ++frame_drift_n;
                }
            }
            if (frame_drift_n > 0) {
                drift_sum += frame_drift;
                drift_count += frame_drift_n;
                frame_drift /= frame_drift_n;
            }
        }

        nlohmann::json line = {
            {"frame", rec.index},
            {"pose", pose_json(rec.pose)},
            {"e_total", rec.energy.total},
            {"e_dense", rec.energy.dense},
            {"e_sparse", rec.energy.sparse},
            {"e_reg", rec.energy.reg},
            {"dense_count", rec.dense_count},
            {"sparse_count", rec.sparse_count},
            {"match_count", rec.match_count},
            {"features_added", rec.features_added},
            {"anomalies", rec.anomalies},
            {"icp_degraded", rec.icp_degraded},
            {"icp_rms", rec.icp_rms},
            {"fused", rec.fusion.fused},
            {"activated", rec.expansion.activated},
            {"drift_mean", frame_drift},
        };
        metrics << line.dump() << "\n";
        for (const EnergyTraceEntry& e : rec.trace) {
            nlohmann::json el = {{"frame", rec.index},
                                 {"level", e.level},
                                 {"iteration", e.iteration},
                                 {"e_total", e.energy.total},
                                 {"e_dense", e.energy.dense},
                                 {"e_sparse", e.energy.sparse},
                                 {"e_reg", e.energy.reg},
                                 {"pcg_iterations", e.pcg_iterations},
                                 {"anomaly", e.anomaly}};
            energy << el.dump() << "\n";
        }
        if (options.save_per_frame) {
            char name[64];
            std::snprintf(name, sizeof(name), "/mesh_%04d.ply", rec.index);
            SurfaceMesh mesh = extract_mesh(recon.volume(), recon.pose());
            if (!mesh.empty()) {
                compute_normals(mesh);
                write_ply(mesh, options.output_dir + name, true, true);
            }
        }
        std::cout << "frame " << rec.index << ": dense=" << rec.dense_count
                  << " sparse=" << rec.sparse_count << " E=" << rec.energy.total
                  << " fused=" << rec.fusion.fused << "\n";
    }

    SurfaceMesh canonical = recon.canonical_mesh();
    if (!canonical.empty())
        write_ply(canonical, options.output_dir + "/canonical.ply", true, false);
    recon.volume().save(options.output_dir + "/volume.bin");

    nlohmann::json summary = {
        {"frames", recon.frames_processed()},
        {"source_frames", frames.empty() ? 0 : frames.back().index + 1},
        {"vertices", canonical.num_vertices()},
        {"features", recon.feature_store().size()},
    };
    if (scene) {
        summary["drift_mean"] = drift_count > 0 ? drift_sum / drift_count : 0.0;
        summary["drift_samples"] = drift_count;
    }
    std::ofstream(options.output_dir + "/summary.json") << summary.dump(1) << "\n";
    std::cout << "done: " << recon.frames_processed() << " frames, "
              << canonical.num_vertices() << " canonical vertices\n";
}

void run_synth(const std::string& spec_path, const std::string& out_dir) {
    const SceneSpec spec = SceneSpec::load(spec_path);
    render_sequence(spec, out_dir);
    std::cout << "wrote " << spec.frames << " frames to " << out_dir << "\n";
}

void run_eval(const std::string& recon_dir, const std::string& truth_dir,
              const std::string& out_file) {
    std::ifstream ts(truth_dir + "/truth.json");
    if (!ts) throw std::runtime_error("missing ground truth: " + truth_dir + "/truth.json");
    nlohmann::json truth;
    ts >> truth;
    const auto kv = truth["spec"].get<std::map<std::string, std::string>>();
    const SyntheticScene scene{SceneSpec::parse(kv)};

    const SurfaceMesh mesh = read_ply(recon_dir + "/canonical.ply");
    if (mesh.vertices_canonical.empty())
        throw std::runtime_error("evaluation failed: empty reconstruction mesh");
    const DistanceMetrics dist = evaluate_reconstruction(mesh.vertices_canonical, scene);

    nlohmann::json report = {{"distance_mean", dist.mean},
                             {"distance_max", dist.max},
                             {"distance_rms", dist.rms},
                             {"vertex_count", dist.count}};

    std::ifstream ss(recon_dir + "/summary.json");
    if (ss) {
        nlohmann::json summary;
        ss >> summary;
        const int truth_frames = int(truth["frames"].size());
        if (summary.contains("source_frames") &&
            summary["source_frames"].get<int>() > truth_frames)
            throw std::runtime_error("reconstruction uses more frames than the ground truth");
        if (summary.contains("drift_mean")) report["drift_mean"] = summary["drift_mean"];
    }

    std::ofstream os(out_file);
    os << report.dump(1) << "\n";
    std::cout << report.dump(1) << "\n";
}

void run_export_mesh(const std::string& volume_path, const std::string& out_ply) {
    const DeformableVolume volume = DeformableVolume::load(volume_path);
    SurfaceMesh mesh = extract_mesh(volume, GlobalPose{});
    if (mesh.empty()) throw std::runtime_error("volume has no isosurface");
    compute_normals(mesh);
    write_ply(mesh, out_ply, true, false);
    std::cout << "wrote " << mesh.num_vertices() << " vertices to " << out_ply << "\n";
}

}  // namespace wf
