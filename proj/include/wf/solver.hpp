#pragma once

#include <array>
#include <string>
#include <vector>

#include "wf/correspond.hpp"
#include "wf/volume.hpp"

namespace wf {

struct SolverParams {
    double w_d = 1.0;
    double w_s = 0.5;
    double w_r = 5.0;
    int flip_flop_iters = 4;
    double flip_flop_rel_tol = 1e-6;
    double pcg_tol = 1e-4;
    int pcg_max_iters = 50;
    int levels = 3;
    Exec exec = Exec::Parallel;
};

struct EnergyBreakdown {
    double total = 0, sparse = 0, dense = 0, reg = 0;
};

struct EnergyTraceEntry {
    int level = 0;
    int iteration = 0;
    EnergyBreakdown energy;
    int pcg_iterations = 0;
    double pcg_residual = 0;
    bool anomaly = false;  // energy increased beyond tolerance (PCG truncation)
};

/// Marks grid points of zero-crossing cells (all corners observed) plus their
/// one-ring as active; returns the active point indices. Existing activity is
/// kept: the set only grows.
std::vector<int> compute_active_set(DeformableVolume& volume);

/// Normal equations of the position subproblem, A t = b with
/// A = L + B^T B over the active nodes. A is stored as a 27-point block
/// stencil on the grid lattice; the constraint part (B^T B) is cached
/// separately so rotation updates only rebuild the Laplacian part.
class NormalEquations {
public:
    // rows: active node order; node_row maps volume point index -> row or -1
    std::vector<int> rows;
    std::vector<int> node_row;
    // 27 stencil neighbors per row in fixed (dz,dy,dx) order; col = -1 if absent
    std::vector<std::array<Mat3, 27>> blocks;
    std::vector<std::array<int, 27>> cols;
    std::vector<Vec3> rhs;
    std::vector<uint8_t> frozen;  // rows in unconstrained components

    int num_rows() const { return int(rows.size()); }
    void multiply(const std::vector<Vec3>& x, std::vector<Vec3>& out, Exec exec) const;
    double symmetry_error() const;
};

/// Assembles A = L + B^T B and b from the current rotations and constraints.
/// cached_btb, if non-null, holds the constraint part from a previous call
/// with identical constraints and global pose; it is reused instead of
/// reassembled.
struct ConstraintCache {
    bool valid = false;
    std::vector<std::array<Mat3, 27>> blocks;
    std::vector<Vec3> rhs;
};

NormalEquations build_normal_equations(const DeformableVolume& volume,
                                       const GlobalPose& pose,
                                       const std::vector<Correspondence>& constraints,
                                       const SolverParams& params,
                                       ConstraintCache* cache = nullptr);

struct PcgResult {
    int iterations = 0;
    double relative_residual = 0;
};

/// Jacobi-preconditioned conjugate gradient on the assembled system; x holds
/// the stacked positions of the rows (initial guess in, solution out).
PcgResult pcg_solve(const NormalEquations& system, std::vector<Vec3>& x, double tol,
                    int max_iters, Exec exec = Exec::Parallel);

EnergyBreakdown evaluate_energy(const DeformableVolume& volume, const GlobalPose& pose,
                                const std::vector<Correspondence>& constraints,
                                const SolverParams& params);

/// Closed-form per-point rotation fit (orthogonal Procrustes over one-ring
/// edges); nodes with degenerate covariance keep their rotation.
void update_rotations(DeformableVolume& volume, Exec exec = Exec::Parallel);

/// Alternates PCG position solves and closed-form rotation updates.
std::vector<EnergyTraceEntry> flip_flop_solve(DeformableVolume& volume,
                                              const GlobalPose& pose,
                                              const std::vector<Correspondence>& constraints,
                                              const SolverParams& params,
                                              int level = 0);

struct HierarchyLevel {
    DeformableVolume grid;
    std::vector<Correspondence> constraints;
};

/// Coarse-to-fine hierarchy: level 0 is the input grid; each level halves the
/// resolution. All constraints are kept on every level, re-anchored by
/// trilinear weights of that level's grid.
std::vector<HierarchyLevel> build_hierarchy(const DeformableVolume& volume,
                                            const std::vector<Correspondence>& constraints,
                                            int levels);

/// Solves coarse to fine, prolongating each solution to initialize the next
/// finer level; the fine-level result is written back into volume.
std::vector<EnergyTraceEntry> solve_coarse_to_fine(
    DeformableVolume& volume, const GlobalPose& pose,
    const std::vector<Correspondence>& constraints, const SolverParams& params);

struct IcpParams {
    CorrespondenceParams corr;
    int max_iters = 20;
    double rel_tol = 1e-6;
    // a step must lower the RMS by this relative amount or it is reverted;
    // raise to guard against wander along unobservable directions when the
    // damping alone is not enough (any positive value biases the pose toward
    // its initial guess, so the default only rejects non-improving steps)
    double min_improvement = 0.0;
    int min_correspondences = 6;
};

struct IcpResult {
    GlobalPose pose;
    bool converged = false;
    bool degraded = false;  // too few correspondences, pose unchanged
    double rms = 0;
    int iterations = 0;
};

/// Dense projective point-to-plane ICP for the global pose. Sources are the
/// valid buffer samples (canonical pre-images re-warped through the field);
/// targets are looked up projectively in the back-projected frame maps.
IcpResult estimate_global_pose(const GeometryBuffer& buffer,
                               const PointNormalMap& maps, const Intrinsics& intrinsics,
                               const DeformableVolume& volume, const GlobalPose& initial,
                               const IcpParams& params);

}  // namespace wf
