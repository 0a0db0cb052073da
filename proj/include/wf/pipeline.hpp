#pragma once

#include <string>
#include <vector>

#include "wf/config.hpp"
#include "wf/features.hpp"
#include "wf/fusion.hpp"
#include "wf/isosurface.hpp"
#include "wf/solver.hpp"
#include "wf/synthcam.hpp"

namespace wf {

struct FrameFiles {
    int index = -1;
    std::string depth_path;
    std::string color_path;  // empty if absent
};

/// Depth/color pairs found in a frame directory, paired by numeric stem and
/// sorted by it. Throws if no depth frames exist.
std::vector<FrameFiles> scan_frame_directory(const std::string& dir);

Intrinsics load_camera_file(const std::string& path);
Frame load_frame(const FrameFiles& files, const Intrinsics& intrinsics);

struct FrameRecord {
    int index = -1;
    GlobalPose pose;
    EnergyBreakdown energy;  // after the last solve
    int dense_count = 0;
    int sparse_count = 0;
    int match_count = 0;
    int features_added = 0;
    int anomalies = 0;
    bool icp_degraded = false;
    double icp_rms = 0;
    FusionStats fusion;
    ExpansionStats expansion;
    std::vector<EnergyTraceEntry> trace;
};

/// The incremental per-frame loop: extract mesh, rasterize, estimate global
/// pose, match features, alternate dense association and coarse-to-fine
/// solves, then fuse and expand. The first frame bootstraps the volume.
class Reconstructor {
public:
    explicit Reconstructor(const ReconstructionConfig& config);

    FrameRecord process_frame(const Frame& frame, int frame_index);

    const DeformableVolume& volume() const { return volume_; }
    DeformableVolume& volume() { return volume_; }
    const GlobalPose& pose() const { return pose_; }
    const FeatureStore& feature_store() const { return store_; }
    int frames_processed() const { return frames_processed_; }

    /// Canonical isosurface (vertices in the canonical frame).
    SurfaceMesh canonical_mesh() const;

private:
    int add_features(const Frame& frame, const PointNormalMap& maps, int frame_index,
                     const GeometryBuffer* buffer);

    ReconstructionConfig cfg_;
    DeformableVolume volume_;
    GlobalPose pose_;
    FeatureStore store_;
    int frames_processed_ = 0;
};

struct RunOptions {
    std::string input_dir;
    std::string config_path;  // empty = defaults
    std::string output_dir;
    bool save_per_frame = false;
};

/// Full reconstruction run over a frame directory; writes canonical.ply,
/// volume.bin, metrics.jsonl, energy.jsonl, and summary.json into output_dir.
/// When the input directory carries a truth.json sidecar, canonical-stability
/// drift is tracked against the analytic warp. Throws on error.
void run_reconstruct(const RunOptions& options);

void run_synth(const std::string& spec_path, const std::string& out_dir);

/// Distance + drift report comparing a reconstruction directory against a
/// ground-truth directory; written as JSON to out_file.
void run_eval(const std::string& recon_dir, const std::string& truth_dir,
              const std::string& out_file);

void run_export_mesh(const std::string& volume_path, const std::string& out_ply);

}  // namespace wf
