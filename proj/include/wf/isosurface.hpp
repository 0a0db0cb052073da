#pragma once

#include <limits>
#include <string>
#include <vector>

#include "wf/image.hpp"
#include "wf/volume.hpp"

namespace wf {

/// Triangle mesh of the canonical zero level set, with warped vertices.
struct SurfaceMesh {
    std::vector<Vec3> vertices_canonical;
    std::vector<Vec3> vertices_deformed;
    std::vector<Vec3> normals_deformed;  // filled by compute_normals
    std::vector<Vec3f> colors;           // sampled from the volume
    std::vector<Vec3i> triangles;

    size_t num_vertices() const { return vertices_canonical.size(); }
    bool empty() const { return triangles.empty(); }
};

/// Per-pixel output of rasterizing the deformed mesh. Valid pixels carry the
/// world-space sample, its normal, and the canonical pre-image point.
struct GeometryBuffer {
    int width = 0, height = 0;
    std::vector<float> depth;     // +inf where empty
    std::vector<Vec3> point;      // world
    std::vector<Vec3> normal;     // unit, world
    std::vector<Vec3> canonical;  // canonical pre-image of the sample

    GeometryBuffer() = default;
    GeometryBuffer(int w, int h)
        : width(w),
          height(h),
          depth(size_t(w) * h, std::numeric_limits<float>::infinity()),
          point(size_t(w) * h, Vec3::Zero()),
          normal(size_t(w) * h, Vec3::Zero()),
          canonical(size_t(w) * h, Vec3::Zero()) {}

    bool valid(int x, int y) const { return std::isfinite(depth[size_t(y) * width + x]); }
    size_t idx(int x, int y) const { return size_t(y) * width + x; }
};

/// Marching cubes over cells whose 8 corners all have weight > 0; vertices at
/// linearly interpolated zero crossings, welded by edge key. Deformed
/// vertices come from warp_point.
SurfaceMesh extract_mesh(const DeformableVolume& volume, const GlobalPose& pose);

/// Area-weighted per-vertex normals of the deformed triangles.
void compute_normals(SurfaceMesh& mesh);

/// Z-buffered perspective rasterization of the deformed triangles. On equal
/// depth the lower triangle index wins; output is independent of Exec.
GeometryBuffer rasterize(const SurfaceMesh& mesh, const Intrinsics& intrinsics,
                         Exec exec = Exec::Parallel);

/// PLY export with per-vertex color; deformed selects which vertex set.
void write_ply(const SurfaceMesh& mesh, const std::string& path, bool binary,
               bool deformed);
SurfaceMesh read_ply(const std::string& path);

}  // namespace wf
