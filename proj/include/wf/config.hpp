#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "wf/core.hpp"
#include "wf/correspond.hpp"
#include "wf/features.hpp"
#include "wf/fusion.hpp"
#include "wf/solver.hpp"

namespace wf {

/// Flat key=value text, '#' comments, whitespace-trimmed.
std::map<std::string, std::string> parse_key_values(const std::string& text);
std::map<std::string, std::string> read_key_values(const std::string& path);

// typed lookups with defaults
std::string kv_string(const std::map<std::string, std::string>& kv, const std::string& key,
                      const std::string& fallback);
double kv_double(const std::map<std::string, std::string>& kv, const std::string& key,
                 double fallback);
int kv_int(const std::map<std::string, std::string>& kv, const std::string& key, int fallback);
Vec3 kv_vec3(const std::map<std::string, std::string>& kv, const std::string& key,
             const Vec3& fallback);

/// Every tunable of the reconstruction pipeline, with pinned defaults.
struct ReconstructionConfig {
    // volume
    Vec3i volume_dims = Vec3i(64, 64, 64);
    double voxel_size = 0.02;
    Vec3 volume_origin = Vec3(-0.64, -0.64, 0.4);

    SolverParams solver;
    CorrespondenceParams correspond;
    FeatureParams features;
    FusionParams fusion;
    IcpParams icp;

    int reassociations = 3;     // outer associate->solve loops per frame
    int frame_skip = 1;         // use every n-th frame
    int max_frames = 0;         // 0 = all
    bool use_features = true;   // sparse term on/off (ablation)
    bool estimate_pose = true;  // global ICP on/off

    static ReconstructionConfig load(const std::string& path);
    static ReconstructionConfig from_key_values(const std::map<std::string, std::string>& kv);
    void print(std::ostream& os) const;
};

}  // namespace wf
