#pragma once

#include <vector>

#include "wf/image.hpp"
#include "wf/volume.hpp"

namespace wf {

struct FusionParams {
    int k_min = 3;         // optimization steps before a voxel may be fused
    double w_max = 64.0;   // confidence cap
    double sample_weight = 1.0;
    bool bootstrap = false;  // first frame only: ignore the age/activity gate
};

struct FusionStats {
    int fused = 0;
    int skipped_gate = 0;
    int skipped_frustum = 0;
    int skipped_occluded = 0;
};

/// Projective TSDF integration through the current warp. Only active voxels
/// with age >= k_min are written (all voxels in bootstrap mode).
FusionStats integrate_frame(DeformableVolume& volume, const Frame& frame,
                            const GlobalPose& pose, const FusionParams& params = {},
                            Exec exec = Exec::Parallel);

struct ExpansionStats {
    int activated = 0;
    int orphans = 0;  // new points with no active neighbor, set to canonical
};

/// Grows the active set to the current isosurface one-ring; new points get
/// deformation attributes extrapolated from their active neighbors.
ExpansionStats expand_grid(DeformableVolume& volume);

/// Increments the age of exactly the given points (one solve step).
void advance_ages(DeformableVolume& volume, const std::vector<int>& solved);

}  // namespace wf
