#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace wf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Vec3i = Eigen::Vector3i;
using Mat3 = Eigen::Matrix3d;

/// Execution policy for data-parallel kernels. Serial variants are kept as
/// reference implementations; outputs must match the parallel path exactly.
enum class Exec { Serial, Parallel };

/// Rigid transform applied after the local deformation field.
struct GlobalPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
    Vec3 apply_inverse(const Vec3& y) const {
        return rotation.transpose() * (y - translation);
    }
    GlobalPose inverse() const {
        return {rotation.transpose(), -(rotation.transpose() * translation)};
    }
};

// Euler convention, project-wide: intrinsic X-then-Y-then-Z,
// R = Rz(c) * Ry(b) * Rx(a) for angles (a, b, c).
Mat3 euler_to_matrix(const Vec3& abc);
Vec3 matrix_to_euler(const Mat3& r);

/// Nearest rotation matrix (polar factor, det +1).
Mat3 orthonormalize(const Mat3& m);

struct Intrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    bool valid() const { return fx > 0 && fy > 0 && width > 0 && height > 0; }

    /// Camera point -> continuous pixel coordinates (pixel centers at integers).
    Vec2 project(const Vec3& p) const {
        return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
    }
    /// Pixel + depth -> camera point.
    Vec3 backproject(double u, double v, double depth) const {
        return {(u - cx) / fx * depth, (v - cy) / fy * depth, depth};
    }
    bool contains(const Vec2& uv) const {
        return uv.x() >= 0 && uv.y() >= 0 && uv.x() <= width - 1 && uv.y() <= height - 1;
    }
};

inline double deg2rad(double d) { return d * M_PI / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / M_PI; }

/// Angle of the relative rotation between two rotation matrices, radians.
inline double rotation_angle(const Mat3& a, const Mat3& b) {
    double c = ((a.transpose() * b).trace() - 1.0) * 0.5;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace wf
