#include "wf/correspond.hpp"

#include <fstream>

namespace wf {

PointNormalMap backproject_depth(const Frame& frame, Exec exec) {
    if (!frame.intrinsics.valid())
        throw std::invalid_argument("backproject_depth: invalid intrinsics");
    const int w = frame.depth.width, h = frame.depth.height;
    PointNormalMap m;
    m.width = w;
    m.height = h;
    m.point.assign(size_t(w) * h, Vec3::Zero());
    m.normal.assign(size_t(w) * h, Vec3::Zero());
    m.point_valid.assign(size_t(w) * h, 0);
    m.normal_valid.assign(size_t(w) * h, 0);

    auto row_points = [&](int y) {
        for (int x = 0; x < w; ++x) {
            const float d = frame.depth.at(x, y);
            if (d <= 0.f) continue;
            m.point[m.idx(x, y)] = frame.intrinsics.backproject(x, y, d);
            m.point_valid[m.idx(x, y)] = 1;
        }
    };
    auto row_normals = [&](int y) {
        if (y == 0 || y == h - 1) return;
        for (int x = 1; x < w - 1; ++x) {
            const size_t p = m.idx(x, y);
            if (!m.point_valid[p] || !m.point_valid[m.idx(x - 1, y)] ||
                !m.point_valid[m.idx(x + 1, y)] || !m.point_valid[m.idx(x, y - 1)] ||
                !m.point_valid[m.idx(x, y + 1)])
                continue;
            const Vec3 du = m.point[m.idx(x + 1, y)] - m.point[m.idx(x - 1, y)];
            const Vec3 dv = m.point[m.idx(x, y + 1)] - m.point[m.idx(x, y - 1)];
            Vec3 n = du.cross(dv);
            const double len = n.norm();
            if (len < 1e-20) continue;
            n /= len;
            if (n.dot(m.point[p]) > 0) n = -n;  // face the camera
            m.normal[p] = n;
            m.normal_valid[p] = 1;
        }
    };

    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y) row_points(y);
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y) row_normals(y);
    } else {
        for (int y = 0; y < h; ++y) row_points(y);
        for (int y = 0; y < h; ++y) row_normals(y);
    }
    return m;
}

double dense_confidence(double dist, double normal_dot, double view_dot,
                        const CorrespondenceParams& params) {
    const double kd = kernel(dist, params.eps_d);
    const double kn = kernel(1.0 - normal_dot, params.eps_n);
    const double kv = kernel(1.0 - view_dot, params.eps_v);
    if (kd < 0 || kn < 0 || kv < 0) return 0.0;
    const double avg = (kd + kn + kv) / 3.0;
    return avg * avg;
}

bool sample_point_normal(const PointNormalMap& maps, const Vec2& uv, Vec3& point,
                         Vec3& normal) {
    const int tu = int(std::lround(uv.x()));
    const int tv = int(std::lround(uv.y()));
    if (tu < 0 || tv < 0 || tu >= maps.width || tv >= maps.height) return false;

    const int u0 = std::clamp(int(std::floor(uv.x())), 0, maps.width - 2);
    const int v0 = std::clamp(int(std::floor(uv.y())), 0, maps.height - 2);
    bool smooth = true;
    double zmin = std::numeric_limits<double>::infinity(), zmax = -zmin;
    for (int dy = 0; dy < 2 && smooth; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
            const size_t p = maps.idx(u0 + dx, v0 + dy);
            if (!maps.point_valid[p] || !maps.normal_valid[p]) {
                smooth = false;
                break;
            }
            zmin = std::min(zmin, maps.point[p].z());
            zmax = std::max(zmax, maps.point[p].z());
        }
    if (smooth && zmax - zmin < 0.05) {
        const double fu = std::clamp(uv.x() - u0, 0.0, 1.0);
        const double fv = std::clamp(uv.y() - v0, 0.0, 1.0);
        point = Vec3::Zero();
        normal = Vec3::Zero();
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const double w = (dx ? fu : 1 - fu) * (dy ? fv : 1 - fv);
                const size_t p = maps.idx(u0 + dx, v0 + dy);
                point += w * maps.point[p];
                normal += w * maps.normal[p];
            }
        const double len = normal.norm();
        if (len > 1e-12) {
            normal /= len;
            return true;
        }
    }
    const size_t tp = maps.idx(tu, tv);
    if (!maps.point_valid[tp] || !maps.normal_valid[tp]) return false;
    point = maps.point[tp];
    normal = maps.normal[tp];
    return true;
}

std::vector<Correspondence> find_dense_correspondences(
    const GeometryBuffer& buffer, const PointNormalMap& maps,
    const Intrinsics& intrinsics, const CorrespondenceParams& params,
    const DeformableVolume& volume) {
    if (buffer.width != maps.width || buffer.height != maps.height)
        throw std::invalid_argument("find_dense_correspondences: size mismatch");
    std::vector<Correspondence> out;
    for (int y = 0; y < buffer.height; ++y) {
        for (int x = 0; x < buffer.width; ++x) {
            if (!buffer.valid(x, y)) continue;
            const size_t bp = buffer.idx(x, y);
            const Vec3& pc = buffer.point[bp];
            const Vec3& nc = buffer.normal[bp];
            if (nc.squaredNorm() < 0.5) continue;
            const Vec2 uv = intrinsics.project(pc);
            Vec3 pa, na;
            if (!sample_point_normal(maps, uv, pa, na)) continue;
            // view direction: from the sample toward the camera
            const Vec3 v = -pc.normalized();
            const double w =
                dense_confidence((pc - pa).norm(), nc.dot(na), nc.dot(v), params);
            if (w <= 0) continue;
            Correspondence c;
            c.kind = Correspondence::Kind::DensePlane;
            c.canonical = buffer.canonical[bp];
            if (!volume.contains(c.canonical)) continue;
            const TrilinearAnchors a = volume.trilinear_anchors(c.canonical);
            c.anchor_index = a.index;
            c.anchor_weight = a.weight;
            c.target = pa;
            c.target_normal = na;
            c.confidence = w;
            out.push_back(c);
        }
    }
    return out;
}

std::vector<Correspondence> sparse_to_constraints(
    const std::vector<FeatureConstraintInput>& matches, const DeformableVolume& volume) {
    std::vector<Correspondence> out;
    out.reserve(matches.size());
    for (const FeatureConstraintInput& m : matches) {
        if (!volume.contains(m.canonical)) continue;
        Correspondence c;
        c.kind = Correspondence::Kind::SparsePoint;
        c.canonical = m.canonical;
        const TrilinearAnchors a = volume.trilinear_anchors(m.canonical);
        c.anchor_index = a.index;
        c.anchor_weight = a.weight;
        c.target = m.target;
        c.confidence = 1.0;
        out.push_back(c);
    }
    return out;
}

void write_correspondence_ply(const std::vector<Correspondence>& corrs,
                              const DeformableVolume& volume, const GlobalPose& pose,
                              const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "ply\nformat ascii 1.0\nelement vertex " << 2 * corrs.size()
       << "\nproperty float x\nproperty float y\nproperty float z\nelement edge "
       << corrs.size()
       << "\nproperty int vertex1\nproperty int vertex2\nend_header\n";
    for (const Correspondence& c : corrs) {
        const Vec3 src = volume.warp_point(pose, c.canonical);
        os << float(src.x()) << " " << float(src.y()) << " " << float(src.z()) << "\n";
        os << float(c.target.x()) << " " << float(c.target.y()) << " "
           << float(c.target.z()) << "\n";
    }
    for (size_t i = 0; i < corrs.size(); ++i)
        os << 2 * i << " " << 2 * i + 1 << "\n";
}

}  // namespace wf
