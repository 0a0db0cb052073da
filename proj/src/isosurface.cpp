#include "wf/isosurface.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "wf/mc_tables.hpp"

namespace wf {

namespace {

// Edge key: owning grid point (the lower corner of the edge) and axis.
inline int64_t edge_key(int point_index, int axis) {
    return int64_t(point_index) * 3 + axis;
}

// Axis of a cube edge and its lower corner within the cell.
struct CellEdge {
    int corner;  // cube corner index of the lower end
    int axis;
};

CellEdge classify_edge(int e) {
    const int a = kMcEdgeCorners[e][0];
    const int b = kMcEdgeCorners[e][1];
    const int* oa = kMcCornerOffset[a];
    const int* ob = kMcCornerOffset[b];
    for (int axis = 0; axis < 3; ++axis) {
        if (oa[axis] != ob[axis])
            return {oa[axis] < ob[axis] ? a : b, axis};
    }
    return {a, 0};  // unreachable for valid tables
}

}  // namespace

SurfaceMesh extract_mesh(const DeformableVolume& volume, const GlobalPose& pose) {
    SurfaceMesh mesh;
    const Vec3i dims = volume.dims();
    std::unordered_map<int64_t, int> edge_vertices;

    CellEdge edge_info[12];
    for (int e = 0; e < 12; ++e) edge_info[e] = classify_edge(e);

    for (int cz = 0; cz < dims.z() - 1; ++cz)
        for (int cy = 0; cy < dims.y() - 1; ++cy)
            for (int cx = 0; cx < dims.x() - 1; ++cx) {
                int corner_idx[8];
                double corner_val[8];
                bool observed = true;
                int cube_case = 0;
                for (int c = 0; c < 8; ++c) {
                    const int* o = kMcCornerOffset[c];
                    corner_idx[c] = volume.linear_index(cx + o[0], cy + o[1], cz + o[2]);
                    if (volume.weight(corner_idx[c]) <= 0.f) {
                        observed = false;
                        break;
                    }
                    corner_val[c] = volume.tsdf(corner_idx[c]);
                    if (corner_val[c] < 0) cube_case |= 1 << c;
                }
                if (!observed || cube_case == 0 || cube_case == 255) continue;

                const int* tri = kMcTriTable[cube_case];
                for (int n = 0; tri[n] != -1; n += 3) {
                    Vec3i t;
                    for (int k = 0; k < 3; ++k) {
                        const int e = tri[n + k];
                        const CellEdge ce = edge_info[e];
                        const int64_t key = edge_key(corner_idx[ce.corner], ce.axis);
                        auto it = edge_vertices.find(key);
                        if (it == edge_vertices.end()) {
                            const int a = kMcEdgeCorners[e][0];
                            const int b = kMcEdgeCorners[e][1];
                            const double va = corner_val[a], vb = corner_val[b];
                            const Vec3 pa = volume.canonical_position(corner_idx[a]);
                            const Vec3 pb = volume.canonical_position(corner_idx[b]);
                            const double s = va / (va - vb);
                            const Vec3 p = pa + s * (pb - pa);
                            it = edge_vertices.emplace(key, int(mesh.num_vertices())).first;
                            mesh.vertices_canonical.push_back(p);
                            mesh.vertices_deformed.push_back(volume.warp_point(pose, p));
                            mesh.colors.push_back(volume.sample_tsdf(p).color);
                        }
                        t[k] = it->second;
                    }
                    // table order is clockwise seen from outside; flip so
                    // cross products point away from the negative side
                    std::swap(t[1], t[2]);
                    if (t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
                        mesh.triangles.push_back(t);
                }
            }
    return mesh;
}

void compute_normals(SurfaceMesh& mesh) {
    mesh.normals_deformed.assign(mesh.num_vertices(), Vec3::Zero());
    for (const Vec3i& t : mesh.triangles) {
        const Vec3& a = mesh.vertices_deformed[t[0]];
        const Vec3& b = mesh.vertices_deformed[t[1]];
        const Vec3& c = mesh.vertices_deformed[t[2]];
        const Vec3 area_normal = (b - a).cross(c - a);  // 2x area, face direction
        for (int k = 0; k < 3; ++k) mesh.normals_deformed[t[k]] += area_normal;
    }
    for (Vec3& n : mesh.normals_deformed) {
        const double len = n.norm();
        if (len > 1e-20) n /= len;  // isolated vertices keep a zero normal
    }
}

void write_ply(const SurfaceMesh& mesh, const std::string& path, bool binary,
               bool deformed) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    const std::vector<Vec3>& verts =
        deformed ? mesh.vertices_deformed : mesh.vertices_canonical;
    os << "ply\nformat " << (binary ? "binary_little_endian" : "ascii")
       << " 1.0\nelement vertex " << verts.size()
       << "\nproperty float x\nproperty float y\nproperty float z\n"
          "property uchar red\nproperty uchar green\nproperty uchar blue\n"
          "element face "
       << mesh.triangles.size()
       << "\nproperty list uchar int vertex_indices\nend_header\n";
    auto color_byte = [](float v) {
        return static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
    };
    if (binary) {
        for (size_t i = 0; i < verts.size(); ++i) {
            float xyz[3] = {float(verts[i].x()), float(verts[i].y()), float(verts[i].z())};
            os.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
            uint8_t rgb[3] = {color_byte(mesh.colors[i].x()), color_byte(mesh.colors[i].y()),
                              color_byte(mesh.colors[i].z())};
            os.write(reinterpret_cast<const char*>(rgb), 3);
        }
        for (const Vec3i& t : mesh.triangles) {
            uint8_t n = 3;
            os.write(reinterpret_cast<const char*>(&n), 1);
            int idx[3] = {t[0], t[1], t[2]};
            os.write(reinterpret_cast<const char*>(idx), sizeof(idx));
        }
    } else {
        for (size_t i = 0; i < verts.size(); ++i)
            os << float(verts[i].x()) << " " << float(verts[i].y()) << " "
               << float(verts[i].z()) << " " << int(color_byte(mesh.colors[i].x())) << " "
               << int(color_byte(mesh.colors[i].y())) << " "
               << int(color_byte(mesh.colors[i].z())) << "\n";
        for (const Vec3i& t : mesh.triangles)
            os << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
    }
}

SurfaceMesh read_ply(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string line;
    std::getline(is, line);
    if (line != "ply") throw std::runtime_error("not a PLY file: " + path);
    bool binary = false;
    size_t nverts = 0, nfaces = 0;
    while (std::getline(is, line)) {
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "format") {
            std::string fmt;
            ss >> fmt;
            binary = fmt == "binary_little_endian";
        } else if (tok == "element") {
            std::string what;
            size_t n;
            ss >> what >> n;
            if (what == "vertex") nverts = n;
            if (what == "face") nfaces = n;
        } else if (tok == "end_header") {
            break;
        }
    }
    SurfaceMesh mesh;
    mesh.vertices_canonical.reserve(nverts);
    mesh.colors.reserve(nverts);
    for (size_t i = 0; i < nverts; ++i) {
        float xyz[3];
        uint8_t rgb[3];
        if (binary) {
            is.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
            is.read(reinterpret_cast<char*>(rgb), 3);
        } else {
            int r, g, b;
            is >> xyz[0] >> xyz[1] >> xyz[2] >> r >> g >> b;
            rgb[0] = uint8_t(r), rgb[1] = uint8_t(g), rgb[2] = uint8_t(b);
        }
        mesh.vertices_canonical.emplace_back(xyz[0], xyz[1], xyz[2]);
        mesh.colors.emplace_back(rgb[0], rgb[1], rgb[2]);
    }
    mesh.vertices_deformed = mesh.vertices_canonical;
    for (size_t i = 0; i < nfaces; ++i) {
        int idx[3];
        if (binary) {
            uint8_t n;
            is.read(reinterpret_cast<char*>(&n), 1);
            is.read(reinterpret_cast<char*>(idx), sizeof(idx));
        } else {
            int n;
            is >> n >> idx[0] >> idx[1] >> idx[2];
        }
        mesh.triangles.emplace_back(idx[0], idx[1], idx[2]);
    }
    if (!is) throw std::runtime_error("truncated PLY: " + path);
    return mesh;
}

}  // namespace wf
