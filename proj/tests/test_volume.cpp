#include <cstdio>
#include <random>

#include "doctest.h"
#include "wf/volume.hpp"

using namespace wf;

namespace {

DeformableVolume make_grid() {
    return DeformableVolume(Vec3i(8, 8, 8), 0.1, Vec3(-0.4, -0.4, 1.0));
}

// a smooth, mildly non-rigid test field
void apply_test_field(DeformableVolume& v) {
    for (int i = 0; i < v.num_points(); ++i) {
        const Vec3 c = v.canonical_position(i);
        v.deformed(i) = c + Vec3(0.02 * std::sin(3 * c.y()), 0.015 * c.x() * c.x(),
                                 0.01 * std::cos(2 * c.x()));
    }
}

}  // namespace

TEST_CASE("trilinear anchors: weights sum to one and are exact at grid points") {
    const DeformableVolume v = make_grid();
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0, 0.7);
    for (int k = 0; k < 100; ++k) {
        const Vec3 x = v.origin() + Vec3(u(rng), u(rng), u(rng));
        const TrilinearAnchors a = v.trilinear_anchors(x);
        double sum = 0;
        Vec3 blend = Vec3::Zero();
        for (int j = 0; j < 8; ++j) {
            sum += a.weight[j];
            blend += a.weight[j] * v.canonical_position(a.index[j]);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        // with the identity field the blend reproduces the query point
        CHECK((blend - x).norm() < 1e-12);
    }
    // at an exact grid point one anchor carries all the weight (which corner
    // of the cell it is depends on floor round-off)
    const TrilinearAnchors a = v.trilinear_anchors(v.canonical_position(v.linear_index(2, 3, 4)));
    int best = 0;
    for (int j = 1; j < 8; ++j)
        if (a.weight[j] > a.weight[best]) best = j;
    CHECK(a.weight[best] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.index[best] == v.linear_index(2, 3, 4));
}

TEST_CASE("contains tolerates round-off at the boundary") {
    const DeformableVolume v = make_grid();
    const Vec3 hi = v.origin() + v.voxel_size() * (v.dims().cast<double>() - Vec3::Ones());
    CHECK(v.contains(hi));
    CHECK(v.contains(hi + Vec3::Constant(1e-12)));
    CHECK(!v.contains(hi + Vec3::Constant(1e-3)));
    CHECK(v.contains(v.origin()));
    CHECK(!v.contains(v.origin() - Vec3::Constant(1e-3)));
    // anchors of a boundary point stay in range
    const TrilinearAnchors a = v.trilinear_anchors(hi);
    for (int j = 0; j < 8; ++j) {
        CHECK(a.index[j] >= 0);
        CHECK(a.index[j] < v.num_points());
    }
}

TEST_CASE("interpolate_deformed is the identity on an untouched grid") {
    const DeformableVolume v = make_grid();
    const Vec3 x(-0.07, 0.21, 1.33);
    CHECK((v.interpolate_deformed(x) - x).norm() < 1e-12);
}

TEST_CASE("deformed_jacobian matches central finite differences") {
    DeformableVolume v = make_grid();
    apply_test_field(v);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.15, 0.55);
    for (int k = 0; k < 20; ++k) {
        const Vec3 x = v.origin() + Vec3(u(rng), u(rng), u(rng));
        const Mat3 j = v.deformed_jacobian(x);
        const double h = 1e-6;
        Mat3 fd;
        for (int c = 0; c < 3; ++c) {
            Vec3 dx = Vec3::Zero();
            dx[c] = h;
            fd.col(c) = (v.interpolate_deformed(x + dx) - v.interpolate_deformed(x - dx)) / (2 * h);
        }
        CHECK((j - fd).norm() < 1e-6);
    }
}

TEST_CASE("invert_warp undoes warp_point under pose and field") {
    DeformableVolume v = make_grid();
    apply_test_field(v);
    const GlobalPose pose{euler_to_matrix(Vec3(0.05, -0.1, 0.2)), Vec3(0.1, 0.0, -0.05)};
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.1, 0.6);
    for (int k = 0; k < 50; ++k) {
        const Vec3 x = v.origin() + Vec3(u(rng), u(rng), u(rng));
        const Vec3 y = v.warp_point(pose, x);
        const auto back = v.invert_warp(pose, y, x + Vec3(0.03, -0.02, 0.04));
        REQUIRE(back.has_value());
        CHECK((*back - x).norm() < 1e-5);
    }
}

TEST_CASE("invert_warp fails gracefully far outside the grid") {
    const DeformableVolume v = make_grid();
    const auto r = v.invert_warp(GlobalPose{}, Vec3(50, 50, 50), v.origin());
    CHECK(!r.has_value());
}

TEST_CASE("sample_tsdf interpolates distance and weight") {
    DeformableVolume v = make_grid();
    // linear field d(z) = z - 1.35 is reproduced exactly by trilinear sampling
    for (int i = 0; i < v.num_points(); ++i) {
        v.tsdf(i) = float(v.canonical_position(i).z() - 1.35);
        v.weight(i) = 2.0f;
    }
    const TsdfSample s = v.sample_tsdf(Vec3(-0.13, 0.02, 1.4));
    CHECK(s.distance == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(s.weight == doctest::Approx(2.0));
}

TEST_CASE("save/load round trip preserves every attribute") {
    DeformableVolume v = make_grid();
    apply_test_field(v);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < v.num_points(); ++i) {
        v.tsdf(i) = float(u(rng));
        v.weight(i) = float(std::abs(u(rng)));
        v.color(i) = Vec3f(float(u(rng)), float(u(rng)), float(u(rng)));
        v.euler(i) = 0.1 * Vec3(u(rng), u(rng), u(rng));
        v.age(i) = i % 5;
        v.set_active(i, i % 3 == 0);
    }
    const std::string path = "volume_roundtrip.bin";
    v.save(path);
    const DeformableVolume w = DeformableVolume::load(path);
    std::remove(path.c_str());
    REQUIRE(w.dims() == v.dims());
    CHECK(w.voxel_size() == v.voxel_size());
    CHECK((w.origin() - v.origin()).norm() == 0);
    CHECK(w.truncation() == v.truncation());
    for (int i = 0; i < v.num_points(); ++i) {
        CHECK(w.tsdf(i) == v.tsdf(i));
        CHECK(w.weight(i) == v.weight(i));
        CHECK((w.color(i) - v.color(i)).norm() == 0);
        CHECK((w.deformed(i) - v.deformed(i)).norm() == 0);
        CHECK((w.euler(i) - v.euler(i)).norm() == 0);
        CHECK(w.age(i) == v.age(i));
        CHECK(w.active(i) == v.active(i));
    }
}
