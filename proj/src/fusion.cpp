#include "wf/fusion.hpp"

#include "wf/solver.hpp"

namespace wf {

FusionStats integrate_frame(DeformableVolume& volume, const Frame& frame,
                            const GlobalPose& pose, const FusionParams& params,
                            Exec exec) {
    FusionStats stats;
    const double mu = volume.truncation();
    const int n = volume.num_points();
    std::vector<int> fused(n, 0), gate(n, 0), frustum(n, 0), occluded(n, 0);

    auto integrate_one = [&](int i) {
        if (!params.bootstrap && (!volume.active(i) || volume.age(i) < params.k_min)) {
            gate[i] = 1;
            return;
        }
        const Vec3 warped = volume.warp_point(pose, volume.canonical_position(i));
        if (warped.z() <= 0) {
            frustum[i] = 1;
            return;
        }
        const Vec2 uv = frame.intrinsics.project(warped);
        const int u = int(std::lround(uv.x()));
        const int v = int(std::lround(uv.y()));
        if (u < 0 || v < 0 || u >= frame.depth.width || v >= frame.depth.height) {
            frustum[i] = 1;
            return;
        }
        // bilinear depth when the whole footprint is valid: keeps d smooth
        // under sub-pixel projection shifts; nearest pixel otherwise
        double depth = frame.depth.at(u, v);
        {
            const int u0 = std::clamp(int(std::floor(uv.x())), 0, frame.depth.width - 2);
            const int v0 = std::clamp(int(std::floor(uv.y())), 0, frame.depth.height - 2);
            const float d00 = frame.depth.at(u0, v0), d10 = frame.depth.at(u0 + 1, v0);
            const float d01 = frame.depth.at(u0, v0 + 1), d11 = frame.depth.at(u0 + 1, v0 + 1);
            if (d00 > 0 && d10 > 0 && d01 > 0 && d11 > 0) {
                const double fu = std::clamp(uv.x() - u0, 0.0, 1.0);
                const double fv = std::clamp(uv.y() - v0, 0.0, 1.0);
                depth = (1 - fv) * ((1 - fu) * d00 + fu * d10) +
                        fv * ((1 - fu) * d01 + fu * d11);
            }
        }
        if (depth <= 0) {
            frustum[i] = 1;
            return;
        }
        const double sdf = double(depth) - warped.z();
        if (sdf < -mu) {
            occluded[i] = 1;
            return;
        }
        const double d = std::min(sdf, mu);
        const double w = params.sample_weight;
        const double w_old = volume.weight(i);
        volume.tsdf(i) = float((w_old * volume.tsdf(i) + w * d) / (w_old + w));
        if (!frame.color.empty()) {
            Vec3f c = (float(w_old) * volume.color(i) + float(w) * frame.color.at(u, v)) /
                      float(w_old + w);
            for (int k = 0; k < 3; ++k) c[k] = std::clamp(c[k], 0.f, 255.f);
            volume.color(i) = c;
        }
        volume.weight(i) = float(std::min(w_old + w, params.w_max));
        fused[i] = 1;
    };

    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) integrate_one(i);
    } else {
        for (int i = 0; i < n; ++i) integrate_one(i);
    }
    for (int i = 0; i < n; ++i) {
        stats.fused += fused[i];
        stats.skipped_gate += gate[i];
        stats.skipped_frustum += frustum[i];
        stats.skipped_occluded += occluded[i];
    }
    return stats;
}

ExpansionStats expand_grid(DeformableVolume& volume) {
    ExpansionStats stats;
    std::vector<uint8_t> was_active(volume.num_points());
    for (int i = 0; i < volume.num_points(); ++i) was_active[i] = volume.active(i);
    compute_active_set(volume);

    const Vec3i neighbors[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int i = 0; i < volume.num_points(); ++i) {
        if (!volume.active(i) || was_active[i]) continue;
        ++stats.activated;
        const Vec3i c = volume.index3(i);
        const Vec3 can = volume.canonical_position(i);
        Vec3 sum = Vec3::Zero();
        int found = 0;
        int nearest = -1;
        for (const Vec3i& d : neighbors) {
            const Vec3i nb = c + d;
            if (!volume.in_grid(nb)) continue;
            const int j = volume.linear_index(nb.x(), nb.y(), nb.z());
            if (!was_active[j]) continue;
            // neighbor's local rigid transform applied to this point
            sum += volume.deformed(j) + volume.rotation(j) * (can - volume.canonical_position(j));
            if (nearest < 0) nearest = j;
            ++found;
        }
        volume.age(i) = 0;
        if (found > 0) {
            volume.deformed(i) = sum / found;
            volume.euler(i) = volume.euler(nearest);
        } else {
            volume.deformed(i) = can;
            volume.euler(i) = Vec3::Zero();
            ++stats.orphans;
        }
    }
    return stats;
}

void advance_ages(DeformableVolume& volume, const std::vector<int>& solved) {
    for (int i : solved) volume.age(i) += 1;
}

}  // namespace wf
