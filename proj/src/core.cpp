#include "wf/core.hpp"

#include <Eigen/SVD>

namespace wf {

Mat3 euler_to_matrix(const Vec3& abc) {
    const double a = abc.x(), b = abc.y(), c = abc.z();
    Mat3 rx, ry, rz;
    rx << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    ry << std::cos(b), 0, std::sin(b), 0, 1, 0, -std::sin(b), 0, std::cos(b);
    rz << std::cos(c), -std::sin(c), 0, std::sin(c), std::cos(c), 0, 0, 0, 1;
    return rz * ry * rx;
}

Vec3 matrix_to_euler(const Mat3& r) {
    // R = Rz(c) Ry(b) Rx(a); r(2,0) = -sin(b)
    double b = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
    double a, c;
    if (std::abs(r(2, 0)) < 1.0 - 1e-12) {
        a = std::atan2(r(2, 1), r(2, 2));
        c = std::atan2(r(1, 0), r(0, 0));
    } else {
        // gimbal lock: put all the freedom into a
        a = std::atan2(-r(1, 2), r(1, 1));
        c = 0.0;
    }
    return {a, b, c};
}

Mat3 orthonormalize(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

}  // namespace wf
