#include <algorithm>
#include <cmath>

#include "wf/isosurface.hpp"

namespace wf {

namespace {

struct TriSetup {
    // screen-space vertices (CCW after normalization), y-down
    Vec2 s[3];
    // per-vertex: 1/z and attributes pre-divided by z
    double inv_z[3];
    Vec3 point_oz[3];
    Vec3 normal_oz[3];
    Vec3 canon_oz[3];
    double inv_area;
    int ymin, ymax, xmin, xmax;
    bool top_left[3];  // edge k runs from vertex k to vertex (k+1)%3
};

inline double edge_fn(const Vec2& a, const Vec2& b, double px, double py) {
    return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

}  // namespace

GeometryBuffer rasterize(const SurfaceMesh& mesh, const Intrinsics& intrinsics,
                         Exec exec) {
    if (!intrinsics.valid())
        throw std::invalid_argument("rasterize: invalid intrinsics");
    GeometryBuffer buf(intrinsics.width, intrinsics.height);
    if (mesh.empty()) return buf;

    const bool have_normals = mesh.normals_deformed.size() == mesh.num_vertices();
    constexpr double kNearPlane = 1e-3;

    std::vector<TriSetup> setups;
    setups.reserve(mesh.triangles.size());
    for (const Vec3i& tri : mesh.triangles) {
        const Vec3* v[3] = {&mesh.vertices_deformed[tri[0]],
                            &mesh.vertices_deformed[tri[1]],
                            &mesh.vertices_deformed[tri[2]]};
        if (v[0]->z() < kNearPlane || v[1]->z() < kNearPlane || v[2]->z() < kNearPlane)
            continue;
        TriSetup t;
        int order[3] = {0, 1, 2};
        for (int k = 0; k < 3; ++k) t.s[k] = intrinsics.project(*v[k]);
        double area2 = edge_fn(t.s[0], t.s[1], t.s[2].x(), t.s[2].y());
        if (area2 == 0.0) continue;
        if (area2 < 0) {  // normalize winding so edge functions are >= 0 inside
            std::swap(t.s[1], t.s[2]);
            std::swap(order[1], order[2]);
            area2 = -area2;
        }
        for (int k = 0; k < 3; ++k) {
            const int vi = tri[order[k]];
            const double z = mesh.vertices_deformed[vi].z();
            t.inv_z[k] = 1.0 / z;
            t.point_oz[k] = mesh.vertices_deformed[vi] / z;
            t.normal_oz[k] =
                (have_normals ? mesh.normals_deformed[vi] : Vec3::Zero()) / z;
            t.canon_oz[k] = mesh.vertices_canonical[vi] / z;
        }
        t.inv_area = 1.0 / area2;
        double uxmin = t.s[0].x(), uxmax = t.s[0].x();
        double uymin = t.s[0].y(), uymax = t.s[0].y();
        for (int k = 1; k < 3; ++k) {
            uxmin = std::min(uxmin, t.s[k].x());
            uxmax = std::max(uxmax, t.s[k].x());
            uymin = std::min(uymin, t.s[k].y());
            uymax = std::max(uymax, t.s[k].y());
        }
        t.xmin = std::max(0, int(std::ceil(uxmin)));
        t.xmax = std::min(intrinsics.width - 1, int(std::floor(uxmax)));
        t.ymin = std::max(0, int(std::ceil(uymin)));
        t.ymax = std::min(intrinsics.height - 1, int(std::floor(uymax)));
        if (t.xmin > t.xmax || t.ymin > t.ymax) continue;
        for (int k = 0; k < 3; ++k) {
            const Vec2& a = t.s[k];
            const Vec2& b = t.s[(k + 1) % 3];
            // top-left fill rule; normalized winding is clockwise on screen
            // (y-down), so top edges run left-to-right and left edges upward
            t.top_left[k] = (a.y() == b.y() && b.x() > a.x()) || (b.y() < a.y());
        }
        setups.push_back(t);
    }

    // Rows are independent; triangles are visited in index order per row so
    // z-ties resolve to the lower triangle index regardless of Exec.
    auto process_row = [&](int y) {
        const double py = double(y);
        for (const TriSetup& t : setups) {
            if (y < t.ymin || y > t.ymax) continue;
            for (int x = t.xmin; x <= t.xmax; ++x) {
                const double px = double(x);
                bool inside = true;
                double w[3];
                for (int k = 0; k < 3; ++k) {
                    w[k] = edge_fn(t.s[(k + 1) % 3], t.s[(k + 2) % 3], px, py);
                    if (w[k] < 0 || (w[k] == 0 && !t.top_left[(k + 1) % 3])) {
                        inside = false;
                        break;
                    }
                }
                if (!inside) continue;
                const double l0 = w[0] * t.inv_area;
                const double l1 = w[1] * t.inv_area;
                const double l2 = 1.0 - l0 - l1;
                const double inv_z =
                    l0 * t.inv_z[0] + l1 * t.inv_z[1] + l2 * t.inv_z[2];
                const double z = 1.0 / inv_z;
                const size_t p = buf.idx(x, y);
                if (float(z) < buf.depth[p]) {
                    buf.depth[p] = float(z);
                    buf.point[p] =
                        (l0 * t.point_oz[0] + l1 * t.point_oz[1] + l2 * t.point_oz[2]) * z;
                    Vec3 n =
                        (l0 * t.normal_oz[0] + l1 * t.normal_oz[1] + l2 * t.normal_oz[2]) * z;
                    const double nl = n.norm();
                    buf.normal[p] = nl > 1e-20 ? Vec3(n / nl) : Vec3::Zero();
                    buf.canonical[p] =
                        (l0 * t.canon_oz[0] + l1 * t.canon_oz[1] + l2 * t.canon_oz[2]) * z;
                }
            }
        }
    };

    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int y = 0; y < intrinsics.height; ++y) process_row(y);
    } else {
        for (int y = 0; y < intrinsics.height; ++y) process_row(y);
    }
    return buf;
}

}  // namespace wf
