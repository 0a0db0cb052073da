#include <cmath>

#include "doctest.h"
#include "wf/synthcam.hpp"

using namespace wf;

namespace {

SceneSpec plane_spec(double z) {
    SceneSpec s;
    ShapeSpec p;
    p.type = ShapeType::Plane;
    p.normal = Vec3(0, 0, -1);
    p.offset = -z;
    s.shapes = {p};
    s.frames = 5;
    s.bounds_min = Vec3(-0.4, -0.4, z - 0.1);
    s.bounds_max = Vec3(0.4, 0.4, z + 0.1);
    return s;
}

SceneSpec sphere_spec(const Vec3& center, double radius) {
    SceneSpec s;
    ShapeSpec sp;
    sp.type = ShapeType::Sphere;
    sp.center = center;
    sp.radius = radius;
    s.shapes = {sp};
    s.bounds_min = center - Vec3::Constant(radius + 0.1);
    s.bounds_max = center + Vec3::Constant(radius + 0.1);
    return s;
}

}  // namespace

TEST_CASE("shape signed distances") {
    ShapeSpec sph;
    sph.type = ShapeType::Sphere;
    sph.center = Vec3(0, 0, 1.2);
    sph.radius = 0.3;
    CHECK(shape_sdf(sph, Vec3(0, 0, 0.8)) == doctest::Approx(0.1));
    CHECK(shape_sdf(sph, Vec3(0, 0, 1.2)) == doctest::Approx(-0.3));

    ShapeSpec pl;
    pl.type = ShapeType::Plane;
    pl.normal = Vec3(0, 0, -1);
    pl.offset = -1.3;
    CHECK(shape_sdf(pl, Vec3(0.2, -0.1, 1.1)) == doctest::Approx(0.2));
    CHECK(shape_sdf(pl, Vec3(0, 0, 1.5)) == doctest::Approx(-0.2));

    ShapeSpec cyl;
    cyl.type = ShapeType::Cylinder;
    cyl.center = Vec3(0, 0, 1.3);
    cyl.axis = Vec3(1, 0, 0);
    cyl.radius = 0.1;
    cyl.half_height = 0.2;
    CHECK(shape_sdf(cyl, Vec3(0, 0, 1.45)) == doctest::Approx(0.05));  // radially outside
    CHECK(shape_sdf(cyl, Vec3(0.27, 0, 1.3)) == doctest::Approx(0.07));  // past the cap
    CHECK(shape_sdf(cyl, Vec3(0.1, 0, 1.3)) == doctest::Approx(-0.1));  // on the axis

    ShapeSpec box;
    box.type = ShapeType::Box;
    box.center = Vec3(0, 0, 1.0);
    box.half_extents = Vec3(0.2, 0.3, 0.1);
    CHECK(shape_sdf(box, Vec3(0.35, 0, 1.0)) == doctest::Approx(0.15));
    CHECK(shape_sdf(box, Vec3(0, 0, 1.0)) == doctest::Approx(-0.1));
}

TEST_CASE("static scene renders identical frames with exact center depth") {
    const double z = 1.3;
    SceneSpec spec = plane_spec(z);
    const SyntheticScene scene(spec);
    const Frame f0 = scene.render_frame(0);
    const Frame f4 = scene.render_frame(4);
    REQUIRE(f0.depth.width == spec.intrinsics.width);
    for (size_t i = 0; i < f0.depth.data.size(); ++i) CHECK(f0.depth.data[i] == f4.depth.data[i]);
    for (size_t i = 0; i < f0.color.data.size(); ++i)
        CHECK((f0.color.data[i] - f4.color.data[i]).norm() == 0);
    // fronto-parallel plane: every valid pixel reads the plane depth
    int valid = 0;
    for (float d : f0.depth.data)
        if (d > 0) {
            ++valid;
            CHECK(d == doctest::Approx(z).epsilon(1e-4));
        }
    CHECK(valid == f0.depth.width * f0.depth.height);
    // serial and parallel rendering agree bit-for-bit
    const Frame fs = scene.render_frame(0, Exec::Serial);
    for (size_t i = 0; i < f0.depth.data.size(); ++i) CHECK(f0.depth.data[i] == fs.depth.data[i]);
}

TEST_CASE("sphere rendering matches the analytic ray-sphere depth") {
    const Vec3 center(0.05, -0.02, 1.25);
    const double radius = 0.3;
    const SyntheticScene scene(sphere_spec(center, radius));
    const Frame f = scene.render_frame(0);
    const Intrinsics& K = scene.spec().intrinsics;
    for (int y = 40; y < 200; y += 23)
        for (int x = 60; x < 260; x += 19) {
            const Vec3 dir = K.backproject(x, y, 1.0).normalized();
            const double b = dir.dot(center);
            const double disc = b * b - (center.squaredNorm() - radius * radius);
            const float d = f.depth.at(x, y);
            if (disc < 1e-4) continue;  // skip rays that graze the silhouette
            const double t = b - std::sqrt(disc);
            CHECK(d == doctest::Approx(t * dir.z()).epsilon(5e-4));
        }
    // a ray that misses the sphere produces no depth
    CHECK(f.depth.at(2, 2) == 0.0f);
}

TEST_CASE("warp and inverse_warp are mutual inverses for every warp type") {
    SceneSpec spec = sphere_spec(Vec3(0, 0, 1.3), 0.15);
    spec.frames = 20;

    auto check_inverse = [&](const WarpSpec& w) {
        spec.warp = w;
        const SyntheticScene scene(spec);
        for (int frame : {0, 7, 19}) {
            scene.check_diffeomorphism(frame);
            for (double x = -0.2; x <= 0.2; x += 0.13)
                for (double y = -0.2; y <= 0.2; y += 0.13)
                    for (double z = 1.15; z <= 1.45; z += 0.1) {
                        const Vec3 c(x, y, z);
                        CHECK((scene.inverse_warp(frame, scene.warp(frame, c)) - c).norm() < 1e-8);
                    }
        }
    };

    SUBCASE("none is the identity") {
        spec.warp = WarpSpec{};
        const SyntheticScene scene(spec);
        const Vec3 c(0.1, -0.05, 1.3);
        CHECK((scene.warp(10, c) - c).norm() == 0);
        check_inverse(WarpSpec{});
    }
    SUBCASE("rigid") {
        WarpSpec w;
        w.type = WarpType::Rigid;
        w.rotation_axis = Vec3(0.2, 1, 0.1);
        w.deg_per_frame = 0.8;
        w.trans_per_frame = Vec3(0.002, -0.001, 0.001);
        w.pivot = Vec3(0, 0, 1.3);
        check_inverse(w);
    }
    SUBCASE("bend") {
        WarpSpec w;
        w.type = WarpType::Bend;
        w.driver_axis = 0;
        w.rot_axis = 1;
        w.amplitude = 3.0;
        w.pivot = Vec3(0, 0, 1.3);
        check_inverse(w);
    }
    SUBCASE("twist") {
        WarpSpec w;
        w.type = WarpType::Twist;
        w.driver_axis = 2;
        w.amplitude = 2.0;
        w.pivot = Vec3(0, 0, 1.3);
        check_inverse(w);
    }
}

TEST_CASE("warp phase ramps linearly and frame zero is undeformed") {
    SceneSpec spec = sphere_spec(Vec3(0, 0, 1.3), 0.15);
    spec.frames = 11;
    WarpSpec w;
    w.type = WarpType::Bend;
    w.driver_axis = 0;
    w.rot_axis = 1;
    w.amplitude = 2.0;
    w.pivot = Vec3(0, 0, 1.3);
    spec.warp = w;
    const SyntheticScene scene(spec);
    CHECK(scene.warp_phase(0) == 0.0);
    CHECK(scene.warp_phase(10) == doctest::Approx(1.0));
    CHECK(scene.warp_phase(5) == doctest::Approx(0.5));
    const Vec3 c(0.12, 0.03, 1.35);
    CHECK((scene.warp(0, c) - c).norm() < 1e-12);
    // half phase bends by half the angle
    const double a5 = (scene.warp(5, c) - w.pivot).norm();
    CHECK(a5 == doctest::Approx((c - w.pivot).norm()).epsilon(1e-9));  // rotation preserves radius
}

TEST_CASE("an extreme bend is rejected as non-diffeomorphic") {
    SceneSpec spec = sphere_spec(Vec3(0, 0, 1.3), 0.15);
    spec.frames = 10;
    WarpSpec w;
    w.type = WarpType::Bend;
    w.driver_axis = 0;
    w.rot_axis = 1;
    w.amplitude = 500.0;  // folds space over within the bounds
    w.pivot = Vec3(0, 0, 1.3);
    spec.warp = w;
    const SyntheticScene scene(spec);
    CHECK_THROWS(scene.check_diffeomorphism(9));
}

TEST_CASE("camera pose composes per-frame increments") {
    SceneSpec spec = plane_spec(1.3);
    spec.camera.rot_axis = Vec3(0, 1, 0);
    spec.camera.deg_per_frame = 0.5;
    spec.camera.trans_per_frame = Vec3(0.001, 0, 0.002);
    const SyntheticScene scene(spec);
    CHECK(rotation_angle(scene.camera_pose(0).rotation, Mat3::Identity()) == 0.0);
    CHECK((scene.camera_pose(0).translation - Vec3::Zero()).norm() == 0);
    const GlobalPose p4 = scene.camera_pose(4);
    CHECK(rad2deg(rotation_angle(p4.rotation, Mat3::Identity())) == doctest::Approx(2.0));
    // relative motion between consecutive frames stays at the per-frame rate
    const GlobalPose p3 = scene.camera_pose(3);
    CHECK(rad2deg(rotation_angle(p3.rotation, p4.rotation)) == doctest::Approx(0.5));
}

TEST_CASE("frame skip keeps every n-th frame starting at zero") {
    CHECK(frame_skip_indices(10, 1) == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(frame_skip_indices(10, 3) == std::vector<int>{0, 3, 6, 9});
    CHECK(frame_skip_indices(7, 6) == std::vector<int>{0, 6});
}

TEST_CASE("scene spec key-value round trip") {
    SceneSpec spec = sphere_spec(Vec3(0.1, -0.2, 1.4), 0.22);
    spec.frames = 42;
    spec.noise_sigma = 0.0015;
    spec.texture.type = TextureType::Checker;
    spec.texture.scale = 0.035;
    spec.warp.type = WarpType::Bend;
    spec.warp.amplitude = 2.5;
    spec.warp.pivot = Vec3(0, 0, 1.4);
    spec.camera.deg_per_frame = 0.25;
    const SceneSpec back = SceneSpec::parse(spec.to_key_values());
    CHECK(back.frames == spec.frames);
    CHECK(back.noise_sigma == doctest::Approx(spec.noise_sigma));
    REQUIRE(back.shapes.size() == 1);
    CHECK(back.shapes[0].type == ShapeType::Sphere);
    CHECK((back.shapes[0].center - spec.shapes[0].center).norm() < 1e-12);
    CHECK(back.shapes[0].radius == doctest::Approx(spec.shapes[0].radius));
    CHECK(back.texture.type == TextureType::Checker);
    CHECK(back.texture.scale == doctest::Approx(spec.texture.scale));
    CHECK(back.warp.type == WarpType::Bend);
    CHECK(back.warp.amplitude == doctest::Approx(spec.warp.amplitude));
    CHECK((back.warp.pivot - spec.warp.pivot).norm() < 1e-12);
    CHECK(back.camera.deg_per_frame == doctest::Approx(spec.camera.deg_per_frame));
    CHECK((back.bounds_min - spec.bounds_min).norm() < 1e-12);
    CHECK((back.bounds_max - spec.bounds_max).norm() < 1e-12);
}

TEST_CASE("evaluate_reconstruction reports zero for exact surface samples") {
    const Vec3 center(0, 0, 1.3);
    const double radius = 0.2;
    const SyntheticScene scene(sphere_spec(center, radius));
    std::vector<Vec3> exact, biased;
    for (double a = 0; a < 6.28; a += 0.37) {
        const Vec3 p = center + radius * Vec3(std::cos(a), std::sin(a), 0);
        exact.push_back(p);
        biased.push_back(p + 0.01 * Vec3(std::cos(a), std::sin(a), 0));
    }
    const DistanceMetrics m0 = evaluate_reconstruction(exact, scene);
    CHECK(m0.count == int(exact.size()));
    CHECK(m0.max < 1e-9);
    const DistanceMetrics m1 = evaluate_reconstruction(biased, scene);
    CHECK(m1.mean == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(m1.rms == doctest::Approx(0.01).epsilon(1e-6));
    CHECK(m1.max == doctest::Approx(0.01).epsilon(1e-6));
}
