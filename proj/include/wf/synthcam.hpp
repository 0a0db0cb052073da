#pragma once

#include <map>
#include <string>
#include <vector>

#include "wf/image.hpp"

namespace wf {

enum class ShapeType { Sphere, Box, Plane, Cylinder };

struct ShapeSpec {
    ShapeType type = ShapeType::Sphere;
    Vec3 center = Vec3(0, 0, 1.2);
    double radius = 0.3;               // sphere, cylinder
    Vec3 half_extents = Vec3(0.3, 0.3, 0.3);  // box
    Vec3 normal = Vec3(0, 0, -1);      // plane: n.x - offset
    double offset = -1.2;              // plane
    Vec3 axis = Vec3(0, 1, 0);         // cylinder axis (unit)
    double half_height = 0.4;          // cylinder cap
};

double shape_sdf(const ShapeSpec& shape, const Vec3& p);

enum class TextureType { Checker, Noise, Dots };

struct TextureSpec {
    TextureType type = TextureType::Dots;
    double scale = 0.06;     // cell size in meters
    uint32_t seed = 7;
    double dot_radius = 0.3; // fraction of the cell size
};

Vec3f texture_color(const TextureSpec& tex, const Vec3& canonical);

enum class WarpType { None, Rigid, Bend, Twist };

/// Time-parameterized deformation of the canonical scene. Bend rotates each
/// point about rot_axis by an angle proportional to its driver-axis
/// coordinate; twist does the same about the driver axis itself. The rigid
/// warp is a per-frame rotation + translation of the whole scene. Amplitudes
/// ramp linearly over the sequence, or oscillate when frequency > 0.
struct WarpSpec {
    WarpType type = WarpType::None;
    int driver_axis = 0;     // bend/twist: coordinate driving the angle
    int rot_axis = 2;        // bend: rotation axis index
    double amplitude = 0;    // bend: rad/m at full phase; twist: rad/m
    double frequency = 0;    // oscillations per sequence; 0 = linear ramp
    Vec3 pivot = Vec3::Zero();
    Vec3 rotation_axis = Vec3(0, 1, 0);  // rigid
    double deg_per_frame = 0;            // rigid
    Vec3 trans_per_frame = Vec3::Zero(); // rigid
};

struct CameraSpec {
    Vec3 rot_axis = Vec3(0, 1, 0);
    double deg_per_frame = 0;
    Vec3 trans_per_frame = Vec3::Zero();
};

struct SceneSpec {
    int frames = 10;
    Intrinsics intrinsics{280.0, 280.0, 159.5, 119.5, 320, 240};
    std::vector<ShapeSpec> shapes;
    TextureSpec texture;
    WarpSpec warp;
    CameraSpec camera;
    double t_min = 0.05, t_max = 6.0;  // ray march interval
    double noise_sigma = 0;            // depth noise, meters
    uint32_t noise_seed = 1;
    Vec3 bounds_min = Vec3(-1, -1, 0.2);
    Vec3 bounds_max = Vec3(1, 1, 2.5);

    static SceneSpec parse(const std::map<std::string, std::string>& kv);
    static SceneSpec load(const std::string& path);
    std::map<std::string, std::string> to_key_values() const;
};

struct DistanceMetrics {
    double mean = 0, max = 0, rms = 0;
    int count = 0;
};

class SyntheticScene {
public:
    explicit SyntheticScene(SceneSpec spec);

    const SceneSpec& spec() const { return spec_; }

    double sdf(const Vec3& canonical) const;
    Vec3f color(const Vec3& canonical) const { return texture_color(spec_.texture, canonical); }

    /// Warp time scale in [0,1] (linear ramp) or [-1,1] (oscillation).
    double warp_phase(int frame) const;
    Vec3 warp(int frame, const Vec3& canonical) const;
    Vec3 inverse_warp(int frame, const Vec3& world) const;
    GlobalPose camera_pose(int frame) const;  // world -> camera

    /// Samples the warp Jacobian on a lattice over the scene bounds; throws
    /// with the frame index if any determinant is non-positive.
    void check_diffeomorphism(int frame) const;

    Frame render_frame(int frame, Exec exec = Exec::Parallel) const;

private:
    SceneSpec spec_;
};

/// Writes depth_NNNN.pgm / color_NNNN.ppm frames, camera.txt intrinsics, and
/// a ground-truth sidecar (truth.json + per-frame warp_NNNN.bin lattice
/// samples) into out_dir.
void render_sequence(const SceneSpec& spec, const std::string& out_dir,
                     Exec exec = Exec::Parallel);

/// Original frame indices retained when keeping every n-th frame.
std::vector<int> frame_skip_indices(int frame_count, int n);

/// Point-to-surface distances of canonical mesh vertices against the
/// analytic canonical SDF.
DistanceMetrics evaluate_reconstruction(const std::vector<Vec3>& canonical_vertices,
                                        const SyntheticScene& scene);

}  // namespace wf
