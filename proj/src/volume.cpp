#include "wf/volume.hpp"

#include <cstring>
#include <fstream>

namespace wf {

DeformableVolume::DeformableVolume(const Vec3i& dims, double voxel_size, const Vec3& origin)
    : dims_(dims), voxel_size_(voxel_size), origin_(origin) {
    if ((dims.array() < 2).any())
        throw std::invalid_argument("DeformableVolume: each dim must be >= 2");
    if (voxel_size <= 0)
        throw std::invalid_argument("DeformableVolume: voxel_size must be > 0");
    truncation_ = 4.0 * voxel_size;
    const size_t n = size_t(dims.x()) * dims.y() * dims.z();
    tsdf_.assign(n, 0.f);
    weight_.assign(n, 0.f);
    color_.assign(n, Vec3f::Zero());
    deformed_.resize(n);
    euler_.assign(n, Vec3::Zero());
    age_.assign(n, 0);
    active_.assign(n, 0);
    for (size_t i = 0; i < n; ++i)
        deformed_[i] = canonical_position(static_cast<int>(i));
}

bool DeformableVolume::contains(const Vec3& x) const {
    // small slack so grid-corner positions survive floating-point round-off
    const double eps = 1e-9;
    const Vec3 rel = (x - origin_) / voxel_size_;
    return (rel.array() >= -eps).all() &&
           (rel.array() <= (dims_.cast<double>().array() - 1.0 + eps)).all();
}

TrilinearAnchors DeformableVolume::trilinear_anchors(const Vec3& x) const {
    if (!contains(x))
        throw std::out_of_range("trilinear_anchors: point outside grid");
    const Vec3 rel = (x - origin_) / voxel_size_;
    Vec3i cell;
    Vec3 frac;
    for (int k = 0; k < 3; ++k) {
        int c = static_cast<int>(std::floor(rel[k]));
        c = std::clamp(c, 0, dims_[k] - 2);  // boundary lands in the outermost cell
        cell[k] = c;
        frac[k] = std::clamp(rel[k] - c, 0.0, 1.0);
    }
    TrilinearAnchors a;
    int n = 0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                a.index[n] = linear_index(cell.x() + dx, cell.y() + dy, cell.z() + dz);
                a.weight[n] = (dx ? frac.x() : 1 - frac.x()) *
                              (dy ? frac.y() : 1 - frac.y()) *
                              (dz ? frac.z() : 1 - frac.z());
                ++n;
            }
    return a;
}

Vec3 DeformableVolume::interpolate_deformed(const Vec3& x) const {
    const TrilinearAnchors a = trilinear_anchors(x);
    Vec3 p = Vec3::Zero();
    for (int k = 0; k < 8; ++k) p += a.weight[k] * deformed_[a.index[k]];
    return p;
}

Mat3 DeformableVolume::deformed_jacobian(const Vec3& x) const {
    const Vec3 rel = (x - origin_) / voxel_size_;
    Vec3i cell;
    Vec3 f;
    for (int k = 0; k < 3; ++k) {
        int c = static_cast<int>(std::floor(rel[k]));
        c = std::clamp(c, 0, dims_[k] - 2);
        cell[k] = c;
        f[k] = rel[k] - c;
    }
    Mat3 j = Mat3::Zero();
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const Vec3& t =
                    deformed_[linear_index(cell.x() + dx, cell.y() + dy, cell.z() + dz)];
                const double wx = dx ? f.x() : 1 - f.x();
                const double wy = dy ? f.y() : 1 - f.y();
                const double wz = dz ? f.z() : 1 - f.z();
                const double gx = (dx ? 1.0 : -1.0) * wy * wz;
                const double gy = (dy ? 1.0 : -1.0) * wx * wz;
                const double gz = (dz ? 1.0 : -1.0) * wx * wy;
                j.col(0) += t * gx;
                j.col(1) += t * gy;
                j.col(2) += t * gz;
            }
    return j / voxel_size_;
}

std::optional<Vec3> DeformableVolume::invert_warp(const GlobalPose& pose, const Vec3& y,
                                                  const Vec3& seed, int max_iters,
                                                  double tol) const {
    // solve interpolate_deformed(x) = R^T (y - t)
    const Vec3 target = pose.apply_inverse(y);
    Vec3 x = seed;
    if (!contains(x)) return std::nullopt;
    for (int it = 0; it < max_iters; ++it) {
        const Vec3 r = interpolate_deformed(x) - target;
        if (r.norm() <= tol) return x;
        const Mat3 j = deformed_jacobian(x);
        Vec3 step;
        const double det = std::abs(j.determinant());
        if (det > 1e-12) {
            step = j.partialPivLu().solve(r);
        } else {
            step = r;  // damped fixed-point fallback
        }
        const double max_step = voxel_size_;
        if (step.norm() > max_step) step *= max_step / step.norm();
        Vec3 xn = x - step;
        // keep the iterate inside the grid
        for (int k = 0; k < 3; ++k)
            xn[k] = std::clamp(xn[k], origin_[k],
                               origin_[k] + voxel_size_ * (dims_[k] - 1));
        x = xn;
    }
    if ((interpolate_deformed(x) - target).norm() <= tol) return x;
    return std::nullopt;
}

TsdfSample DeformableVolume::sample_tsdf(const Vec3& x) const {
    const TrilinearAnchors a = trilinear_anchors(x);
    TsdfSample s;
    for (int k = 0; k < 8; ++k) {
        s.distance += a.weight[k] * tsdf_[a.index[k]];
        s.weight += a.weight[k] * weight_[a.index[k]];
        s.color += static_cast<float>(a.weight[k]) * color_[a.index[k]];
    }
    return s;
}

namespace {
template <class T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
void read_raw(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void DeformableVolume::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    const char magic[8] = {'W', 'F', 'V', 'O', 'L', '0', '1', '\n'};
    os.write(magic, 8);
    write_raw(os, dims_.x());
    write_raw(os, dims_.y());
    write_raw(os, dims_.z());
    write_raw(os, voxel_size_);
    write_raw(os, origin_.x());
    write_raw(os, origin_.y());
    write_raw(os, origin_.z());
    write_raw(os, truncation_);
    for (int i = 0; i < num_points(); ++i) {
        write_raw(os, tsdf_[i]);
        write_raw(os, weight_[i]);
        write_raw(os, color_[i].x());
        write_raw(os, color_[i].y());
        write_raw(os, color_[i].z());
        write_raw(os, deformed_[i].x());
        write_raw(os, deformed_[i].y());
        write_raw(os, deformed_[i].z());
        write_raw(os, euler_[i].x());
        write_raw(os, euler_[i].y());
        write_raw(os, euler_[i].z());
        write_raw(os, age_[i]);
        write_raw(os, active_[i]);
    }
}

DeformableVolume DeformableVolume::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::memcmp(magic, "WFVOL01\n", 8) != 0)
        throw std::runtime_error("bad volume snapshot header: " + path);
    Vec3i dims;
    double voxel_size, truncation;
    Vec3 origin;
    read_raw(is, dims.x());
    read_raw(is, dims.y());
    read_raw(is, dims.z());
    read_raw(is, voxel_size);
    read_raw(is, origin.x());
    read_raw(is, origin.y());
    read_raw(is, origin.z());
    read_raw(is, truncation);
    DeformableVolume v(dims, voxel_size, origin);
    v.truncation_ = truncation;
    for (int i = 0; i < v.num_points(); ++i) {
        read_raw(is, v.tsdf_[i]);
        read_raw(is, v.weight_[i]);
        read_raw(is, v.color_[i].x());
        read_raw(is, v.color_[i].y());
        read_raw(is, v.color_[i].z());
        read_raw(is, v.deformed_[i].x());
        read_raw(is, v.deformed_[i].y());
        read_raw(is, v.deformed_[i].z());
        read_raw(is, v.euler_[i].x());
        read_raw(is, v.euler_[i].y());
        read_raw(is, v.euler_[i].z());
        read_raw(is, v.age_[i]);
        read_raw(is, v.active_[i]);
    }
    if (!is) throw std::runtime_error("truncated volume snapshot: " + path);
    return v;
}

}  // namespace wf
