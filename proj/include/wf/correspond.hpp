#pragma once

#include <array>
#include <string>
#include <vector>

#include "wf/image.hpp"
#include "wf/isosurface.hpp"
#include "wf/volume.hpp"

namespace wf {

/// One alignment constraint on the deformation field.
struct Correspondence {
    enum class Kind { DensePlane, SparsePoint };
    Kind kind = Kind::DensePlane;
    Vec3 canonical = Vec3::Zero();       // source point in the canonical frame
    std::array<int, 8> anchor_index{};   // trilinear anchors of canonical
    std::array<double, 8> anchor_weight{};
    Vec3 target = Vec3::Zero();          // world-space target
    Vec3 target_normal = Vec3::Zero();   // dense kind only
    double confidence = 0.0;             // w_c in [0,1]
};

struct CorrespondenceParams {
    double eps_d = 0.05;  // meters
    double eps_n = 0.5;   // 1 - normal dot
    double eps_v = 0.8;   // 1 - view dot
};

/// Back-projected depth map: per-pixel camera-space point and normal.
/// Normals come from central differences and face the camera; pixels with an
/// invalid depth neighbor get an invalid (zero) normal.
struct PointNormalMap {
    int width = 0, height = 0;
    std::vector<Vec3> point;
    std::vector<Vec3> normal;
    std::vector<uint8_t> point_valid;
    std::vector<uint8_t> normal_valid;

    size_t idx(int x, int y) const { return size_t(y) * width + x; }
};

PointNormalMap backproject_depth(const Frame& frame, Exec exec = Exec::Parallel);

/// Sub-pixel target lookup: bilinear point/normal when the 2x2 footprint is
/// fully valid and depth-coherent, else the nearest pixel. False if nothing
/// valid at the location.
bool sample_point_normal(const PointNormalMap& maps, const Vec2& uv, Vec3& point,
                         Vec3& normal);

/// Phi_r(x) = 1 - x / eps_r
inline double kernel(double r, double eps_r) { return 1.0 - r / eps_r; }

/// Confidence of a dense candidate, 0 if any kernel is negative.
double dense_confidence(double dist, double normal_dot, double view_dot,
                        const CorrespondenceParams& params);

/// Projective association of rendered surface samples with the input depth
/// map. Output order is by pixel index (row-major); pruned pairs are omitted.
std::vector<Correspondence> find_dense_correspondences(
    const GeometryBuffer& buffer, const PointNormalMap& maps,
    const Intrinsics& intrinsics, const CorrespondenceParams& params,
    const DeformableVolume& volume);

struct FeatureConstraintInput {
    Vec3 canonical;  // stored canonical feature position
    Vec3 target;     // current frame back-projected keypoint, world
};

/// Point-point constraints from matched features, confidence 1.
std::vector<Correspondence> sparse_to_constraints(
    const std::vector<FeatureConstraintInput>& matches, const DeformableVolume& volume);

/// Debug dump: correspondences as a PLY line set (source/target pairs).
void write_correspondence_ply(const std::vector<Correspondence>& corrs,
                              const DeformableVolume& volume, const GlobalPose& pose,
                              const std::string& path);

}  // namespace wf
