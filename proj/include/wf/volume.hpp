#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wf/core.hpp"

namespace wf {

/// The eight grid points of the cell containing a canonical point, with
/// trilinear interpolation weights (weights sum to one).
struct TrilinearAnchors {
    std::array<int, 8> index;
    std::array<double, 8> weight;
};

struct TsdfSample {
    double distance = 0;
    double weight = 0;
    Vec3f color = Vec3f::Zero();
};

/// Unified voxel grid: canonical TSDF (distance, weight, color) plus a
/// deformation field (deformed position and local rotation per grid point).
/// Grid points are indexed x-fastest.
class DeformableVolume {
public:
    DeformableVolume(const Vec3i& dims, double voxel_size, const Vec3& origin);

    const Vec3i& dims() const { return dims_; }
    double voxel_size() const { return voxel_size_; }
    const Vec3& origin() const { return origin_; }
    int num_points() const { return static_cast<int>(tsdf_.size()); }
    double truncation() const { return truncation_; }
    void set_truncation(double mu) { truncation_ = mu; }

    int linear_index(int x, int y, int z) const {
        return x + dims_.x() * (y + dims_.y() * z);
    }
    Vec3i index3(int i) const {
        return {i % dims_.x(), (i / dims_.x()) % dims_.y(), i / (dims_.x() * dims_.y())};
    }
    bool in_grid(const Vec3i& c) const {
        return (c.array() >= 0).all() && (c.array() < dims_.array()).all();
    }

    Vec3 canonical_position(int i) const {
        return origin_ + voxel_size_ * index3(i).cast<double>();
    }
    Vec3 canonical_position(const Vec3i& c) const {
        return origin_ + voxel_size_ * c.cast<double>();
    }

    bool contains(const Vec3& x) const;

    // per grid point attributes
    float& tsdf(int i) { return tsdf_[i]; }
    float tsdf(int i) const { return tsdf_[i]; }
    float& weight(int i) { return weight_[i]; }
    float weight(int i) const { return weight_[i]; }
    Vec3f& color(int i) { return color_[i]; }
    const Vec3f& color(int i) const { return color_[i]; }
    Vec3& deformed(int i) { return deformed_[i]; }
    const Vec3& deformed(int i) const { return deformed_[i]; }
    Vec3& euler(int i) { return euler_[i]; }
    const Vec3& euler(int i) const { return euler_[i]; }
    Mat3 rotation(int i) const { return euler_to_matrix(euler_[i]); }
    void set_rotation(int i, const Mat3& r) { euler_[i] = matrix_to_euler(r); }
    int32_t& age(int i) { return age_[i]; }
    int32_t age(int i) const { return age_[i]; }
    bool active(int i) const { return active_[i] != 0; }
    void set_active(int i, bool a) { active_[i] = a ? 1 : 0; }

    TrilinearAnchors trilinear_anchors(const Vec3& x) const;

    /// Deformation field without the global pose: sum of alpha_i * t_i.
    Vec3 interpolate_deformed(const Vec3& x) const;
    /// d(interpolate_deformed)/dx, analytic.
    Mat3 deformed_jacobian(const Vec3& x) const;

    /// S(x) = R * [sum alpha_i(x) t_i] + t
    Vec3 warp_point(const GlobalPose& pose, const Vec3& x) const {
        return pose.apply(interpolate_deformed(x));
    }

    /// Damped Gauss-Newton inversion of the warp: finds canonical x with
    /// warp_point(pose, x) == y, starting from seed. Steps are clamped to one
    /// voxel; fails after max_iters without convergence.
    std::optional<Vec3> invert_warp(const GlobalPose& pose, const Vec3& y,
                                    const Vec3& seed, int max_iters = 20,
                                    double tol = 1e-6) const;

    TsdfSample sample_tsdf(const Vec3& x) const;

    // flat binary snapshot, little-endian
    void save(const std::string& path) const;
    static DeformableVolume load(const std::string& path);

private:
    Vec3i dims_;
    double voxel_size_;
    Vec3 origin_;
    double truncation_;
    std::vector<float> tsdf_, weight_;
    std::vector<Vec3f> color_;
    std::vector<Vec3> deformed_, euler_;
    std::vector<int32_t> age_;
    std::vector<uint8_t> active_;
};

}  // namespace wf
