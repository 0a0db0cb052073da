#include "wf/solver.hpp"

#include <Eigen/SVD>
#include <numeric>
#include <unordered_map>

namespace wf {

namespace {

constexpr int kCenter = 13;  // offset (0,0,0) in the 27 stencil

inline int stencil_slot(int dx, int dy, int dz) {
    return (dz + 1) * 9 + (dy + 1) * 3 + (dx + 1);
}

const Vec3i kFaceNeighbors[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                 {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

std::vector<int> compute_active_set(DeformableVolume& volume) {
    const Vec3i dims = volume.dims();
    std::vector<uint8_t> on_surface(volume.num_points(), 0);
    for (int cz = 0; cz < dims.z() - 1; ++cz)
        for (int cy = 0; cy < dims.y() - 1; ++cy)
            for (int cx = 0; cx < dims.x() - 1; ++cx) {
                bool observed = true, pos = false, neg = false;
                int corners[8];
                int n = 0;
                for (int dz = 0; dz < 2 && observed; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const int i = volume.linear_index(cx + dx, cy + dy, cz + dz);
                            if (volume.weight(i) <= 0.f) {
                                observed = false;
                                break;
                            }
                            corners[n++] = i;
                            (volume.tsdf(i) < 0 ? neg : pos) = true;
                        }
                if (!observed || !pos || !neg) continue;
                for (int k = 0; k < 8; ++k) on_surface[corners[k]] = 1;
            }
    // one-ring dilation
    for (int i = 0; i < volume.num_points(); ++i) {
        if (!on_surface[i]) continue;
        volume.set_active(i, true);
        const Vec3i c = volume.index3(i);
        for (const Vec3i& d : kFaceNeighbors) {
            const Vec3i nb = c + d;
            if (volume.in_grid(nb)) volume.set_active(volume.linear_index(nb.x(), nb.y(), nb.z()), true);
        }
    }
    std::vector<int> active;
    for (int i = 0; i < volume.num_points(); ++i)
        if (volume.active(i)) active.push_back(i);
    return active;
}

void NormalEquations::multiply(const std::vector<Vec3>& x, std::vector<Vec3>& out,
                               Exec exec) const {
    out.resize(x.size());
    auto row_op = [&](int r) {
        Vec3 acc = Vec3::Zero();
        for (int s = 0; s < 27; ++s) {
            const int c = cols[r][s];
            if (c >= 0) acc += blocks[r][s] * x[c];
        }
        out[r] = acc;
    };
    const int n = num_rows();
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int r = 0; r < n; ++r) row_op(r);
    } else {
        for (int r = 0; r < n; ++r) row_op(r);
    }
}

double NormalEquations::symmetry_error() const {
    double err = 0;
    for (int r = 0; r < num_rows(); ++r) {
        for (int s = 0; s < 27; ++s) {
            const int c = cols[r][s];
            if (c < 0 || c < r) continue;
            // find the mirrored slot in row c
            const int mirror = 26 - s;
            const Mat3& a = blocks[r][s];
            const Mat3 bt = (cols[c][mirror] == r) ? Mat3(blocks[c][mirror].transpose())
                                                   : Mat3(Mat3::Zero());
            err = std::max(err, (a - bt).cwiseAbs().maxCoeff());
        }
    }
    return err;
}

NormalEquations build_normal_equations(const DeformableVolume& volume,
                                       const GlobalPose& pose,
                                       const std::vector<Correspondence>& constraints,
                                       const SolverParams& params,
                                       ConstraintCache* cache) {
    NormalEquations sys;
    sys.node_row.assign(volume.num_points(), -1);
    for (int i = 0; i < volume.num_points(); ++i)
        if (volume.active(i)) {
            sys.node_row[i] = int(sys.rows.size());
            sys.rows.push_back(i);
        }
    const int n = sys.num_rows();
    const Vec3i dims = volume.dims();
    const int sx = 1, sy = dims.x(), sz = dims.x() * dims.y();

    // connected components of the active lattice; components untouched by any
    // constraint are frozen (their block of A would be singular)
    UnionFind uf(n);
    for (int r = 0; r < n; ++r) {
        const Vec3i c = volume.index3(sys.rows[r]);
        for (const Vec3i& d : kFaceNeighbors) {
            const Vec3i nb = c + d;
            if (!volume.in_grid(nb)) continue;
            const int rr = sys.node_row[volume.linear_index(nb.x(), nb.y(), nb.z())];
            if (rr >= 0) uf.unite(r, rr);
        }
    }
    std::vector<uint8_t> component_constrained(n, 0);
    for (const Correspondence& c : constraints)
        for (int k = 0; k < 8; ++k) {
            const int r = sys.node_row[c.anchor_index[k]];
            if (r >= 0 && c.anchor_weight[k] > 0) component_constrained[uf.find(r)] = 1;
        }
    sys.frozen.assign(n, 0);
    for (int r = 0; r < n; ++r)
        if (!component_constrained[uf.find(r)]) sys.frozen[r] = 1;

    sys.blocks.assign(n, {});
    sys.cols.assign(n, {});
    sys.rhs.assign(n, Vec3::Zero());
    for (int r = 0; r < n; ++r) {
        sys.cols[r].fill(-1);
        for (Mat3& b : sys.blocks[r]) b.setZero();
        const Vec3i c = volume.index3(sys.rows[r]);
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const Vec3i nb = c + Vec3i(dx, dy, dz);
                    if (!volume.in_grid(nb)) continue;
                    const int rr = sys.node_row[volume.linear_index(nb.x(), nb.y(), nb.z())];
                    if (rr >= 0) sys.cols[r][stencil_slot(dx, dy, dz)] = rr;
                }
    }

    // constraint part (B^T B and its rhs), cached across flip-flop iterations
    const bool rebuild = !cache || !cache->valid;
    std::vector<std::array<Mat3, 27>> local_blocks;
    std::vector<Vec3> local_rhs;
    std::vector<std::array<Mat3, 27>>& cb = cache ? cache->blocks : local_blocks;
    std::vector<Vec3>& crhs = cache ? cache->rhs : local_rhs;
    if (rebuild) {
        cb.assign(n, {});
        crhs.assign(n, Vec3::Zero());
        for (int r = 0; r < n; ++r)
            for (Mat3& b : cb[r]) b.setZero();

        // bucket constraints by their cell (anchor 0 is the cell's min corner)
        std::unordered_map<int, std::vector<int>> by_cell;
        for (size_t ci = 0; ci < constraints.size(); ++ci)
            by_cell[constraints[ci].anchor_index[0]].push_back(int(ci));

        const Mat3 rot_t = pose.rotation.transpose();
        auto assemble_row = [&](int r) {
            const int node = sys.rows[r];
            const Vec3i ni = volume.index3(node);
            // the 8 cells having this node as a corner, fixed order
            for (int oz = -1; oz <= 0; ++oz)
                for (int oy = -1; oy <= 0; ++oy)
                    for (int ox = -1; ox <= 0; ++ox) {
                        const Vec3i cc = ni + Vec3i(ox, oy, oz);
                        if (cc.x() < 0 || cc.y() < 0 || cc.z() < 0 ||
                            cc.x() >= dims.x() - 1 || cc.y() >= dims.y() - 1 ||
                            cc.z() >= dims.z() - 1)
                            continue;
                        const int cell_key = volume.linear_index(cc.x(), cc.y(), cc.z());
                        auto it = by_cell.find(cell_key);
                        if (it == by_cell.end()) continue;
                        for (int ci : it->second) {
                            const Correspondence& con = constraints[ci];
                            // weight of this row's node in the constraint
                            double alpha_i = 0;
                            for (int k = 0; k < 8; ++k)
                                if (con.anchor_index[k] == node) alpha_i = con.anchor_weight[k];
                            if (alpha_i == 0) continue;
                            if (con.kind == Correspondence::Kind::DensePlane) {
                                const Vec3 g = rot_t * con.target_normal;
                                const double coef = params.w_d * con.confidence;
                                const double cst =
                                    con.target_normal.dot(pose.translation - con.target);
                                const Mat3 ggt = g * g.transpose();
                                for (int k = 0; k < 8; ++k) {
                                    const int col_node = con.anchor_index[k];
                                    const Vec3i cd = volume.index3(col_node) - ni;
                                    cb[r][stencil_slot(cd.x(), cd.y(), cd.z())] +=
                                        coef * alpha_i * con.anchor_weight[k] * ggt;
                                }
                                crhs[r] -= coef * alpha_i * cst * g;
                            } else {
                                const double coef = params.w_s * con.confidence;
                                for (int k = 0; k < 8; ++k) {
                                    const int col_node = con.anchor_index[k];
                                    const Vec3i cd = volume.index3(col_node) - ni;
                                    cb[r][stencil_slot(cd.x(), cd.y(), cd.z())] +=
                                        coef * alpha_i * con.anchor_weight[k] * Mat3::Identity();
                                }
                                crhs[r] += coef * alpha_i *
                                           (rot_t * (con.target - pose.translation));
                            }
                        }
                    }
        };
        if (params.exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
            for (int r = 0; r < n; ++r) assemble_row(r);
        } else {
            for (int r = 0; r < n; ++r) assemble_row(r);
        }
        if (cache) cache->valid = true;
    }

    // A = cached B^T B + Laplacian part; b likewise
    auto finish_row = [&](int r) {
        if (sys.frozen[r]) {
            for (Mat3& b : sys.blocks[r]) b.setZero();
            sys.blocks[r][kCenter] = Mat3::Identity();
            sys.rhs[r] = volume.deformed(sys.rows[r]);
            return;
        }
        sys.blocks[r] = cb[r];
        sys.rhs[r] = crhs[r];
        const int node = sys.rows[r];
        const Vec3i c = volume.index3(node);
        const Mat3 ri = volume.rotation(node);
        const Vec3 can_i = volume.canonical_position(node);
        for (const Vec3i& d : kFaceNeighbors) {
            const Vec3i nb = c + d;
            if (!volume.in_grid(nb)) continue;
            const int jnode = volume.linear_index(nb.x(), nb.y(), nb.z());
            const int rr = sys.node_row[jnode];
            if (rr < 0) continue;  // edges leaving the active set are not in E_reg
            const Vec3 dij = can_i - volume.canonical_position(jnode);
            sys.blocks[r][kCenter] += 2.0 * params.w_r * Mat3::Identity();
            sys.rhs[r] += params.w_r * ((ri + volume.rotation(jnode)) * dij);
            if (sys.frozen[rr]) {
                sys.rhs[r] += 2.0 * params.w_r * volume.deformed(jnode);
            } else {
                sys.blocks[r][stencil_slot(d.x(), d.y(), d.z())] -=
                    2.0 * params.w_r * Mat3::Identity();
            }
        }
    };
    if (params.exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int r = 0; r < n; ++r) finish_row(r);
    } else {
        for (int r = 0; r < n; ++r) finish_row(r);
    }
    (void)sx;
    (void)sy;
    (void)sz;
    return sys;
}

PcgResult pcg_solve(const NormalEquations& system, std::vector<Vec3>& x, double tol,
                    int max_iters, Exec exec) {
    const int n = system.num_rows();
    PcgResult res;
    if (n == 0) return res;

    // Jacobi preconditioner from the diagonal; zero entries fall back to 1
    std::vector<Vec3> inv_diag(n);
    for (int r = 0; r < n; ++r) {
        const Mat3& d = system.blocks[r][kCenter];
        for (int k = 0; k < 3; ++k)
            inv_diag[r][k] = d(k, k) > 1e-300 ? 1.0 / d(k, k) : 1.0;
    }

    double b_norm2 = 0;
    for (const Vec3& b : system.rhs) b_norm2 += b.squaredNorm();
    const double b_norm = std::sqrt(b_norm2);
    if (b_norm == 0) {
        std::fill(x.begin(), x.end(), Vec3::Zero());
        return res;
    }

    std::vector<Vec3> r(n), z(n), p(n), ap(n);
    system.multiply(x, ap, exec);
    for (int i = 0; i < n; ++i) {
        r[i] = system.rhs[i] - ap[i];
        z[i] = inv_diag[i].cwiseProduct(r[i]);
        p[i] = z[i];
    }
    // fixed-order reductions keep results reproducible
    auto dot = [n](const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
        double s = 0;
        for (int i = 0; i < n; ++i) s += a[i].dot(b[i]);
        return s;
    };
    double rz = dot(r, z);
    double r_norm = std::sqrt(dot(r, r));
    res.relative_residual = r_norm / b_norm;
    // converge relative to the initial residual, not |b|: warm starts leave a
    // misfit far below |b| that still has to be solved (an absolute floor
    // avoids spinning on round-off when the start is already converged)
    const double stop = std::max(tol * r_norm, 1e-13 * b_norm);
    for (int it = 0; it < max_iters && r_norm > stop; ++it) {
        system.multiply(p, ap, exec);
        const double pap = dot(p, ap);
        if (pap <= 0) break;  // numerical breakdown on a semi-definite system
        const double alpha = rz / pap;
        for (int i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = inv_diag[i].cwiseProduct(r[i]);
        }
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        r_norm = std::sqrt(dot(r, r));
        res.relative_residual = r_norm / b_norm;
        res.iterations = it + 1;
    }
    return res;
}

EnergyBreakdown evaluate_energy(const DeformableVolume& volume, const GlobalPose& pose,
                                const std::vector<Correspondence>& constraints,
                                const SolverParams& params) {
    EnergyBreakdown e;
    for (const Correspondence& c : constraints) {
        Vec3 q = Vec3::Zero();
        for (int k = 0; k < 8; ++k) {
            if (c.anchor_weight[k] > 0 && !volume.active(c.anchor_index[k]))
                throw std::logic_error("evaluate_energy: constraint anchors an inactive point");
            q += c.anchor_weight[k] * volume.deformed(c.anchor_index[k]);
        }
        const Vec3 s = pose.apply(q);
        if (c.kind == Correspondence::Kind::DensePlane) {
            const double r = (s - c.target).dot(c.target_normal);
            e.dense += c.confidence * r * r;
        } else {
            e.sparse += c.confidence * (s - c.target).squaredNorm();
        }
    }
    const Vec3i dims = volume.dims();
    for (int i = 0; i < volume.num_points(); ++i) {
        if (!volume.active(i)) continue;
        const Mat3 ri = volume.rotation(i);
        const Vec3i c = volume.index3(i);
        const Vec3 can_i = volume.canonical_position(i);
        for (const Vec3i& d : kFaceNeighbors) {
            const Vec3i nb = c + d;
            if (!volume.in_grid(nb)) continue;
            const int j = volume.linear_index(nb.x(), nb.y(), nb.z());
            if (!volume.active(j)) continue;
            const Vec3 resid = (volume.deformed(i) - volume.deformed(j)) -
                               ri * (can_i - volume.canonical_position(j));
            e.reg += resid.squaredNorm();
        }
    }
    e.total = params.w_s * e.sparse + params.w_d * e.dense + params.w_r * e.reg;
    (void)dims;
    return e;
}

void update_rotations(DeformableVolume& volume, Exec exec) {
    const int n = volume.num_points();
    auto fit_one = [&](int i) {
        if (!volume.active(i)) return;
        const Vec3i c = volume.index3(i);
        const Vec3 can_i = volume.canonical_position(i);
        Mat3 h = Mat3::Zero();
        for (const Vec3i& d : kFaceNeighbors) {
            const Vec3i nb = c + d;
            if (!volume.in_grid(nb)) continue;
            const int j = volume.linear_index(nb.x(), nb.y(), nb.z());
            if (!volume.active(j)) continue;
            const Vec3 rest = can_i - volume.canonical_position(j);
            const Vec3 cur = volume.deformed(i) - volume.deformed(j);
            h += rest * cur.transpose();
        }
        Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
        if (svd.singularValues()(1) < 1e-14) return;  // rank < 2: keep previous
        Mat3 r = svd.matrixV() * svd.matrixU().transpose();
        if (r.determinant() < 0) {
            Mat3 flip = Mat3::Identity();
            flip(2, 2) = -1;
            r = svd.matrixV() * flip * svd.matrixU().transpose();
        }
        volume.set_rotation(i, r);
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) fit_one(i);
    } else {
        for (int i = 0; i < n; ++i) fit_one(i);
    }
}

std::vector<EnergyTraceEntry> flip_flop_solve(DeformableVolume& volume,
                                              const GlobalPose& pose,
                                              const std::vector<Correspondence>& constraints,
                                              const SolverParams& params, int level) {
    std::vector<EnergyTraceEntry> trace;
    EnergyBreakdown prev = evaluate_energy(volume, pose, constraints, params);
    if (prev.total == 0) return trace;

    ConstraintCache cache;
    std::vector<Vec3> x;
    for (int it = 0; it < params.flip_flop_iters; ++it) {
        NormalEquations sys =
            build_normal_equations(volume, pose, constraints, params, &cache);
        x.resize(sys.num_rows());
        for (int r = 0; r < sys.num_rows(); ++r) x[r] = volume.deformed(sys.rows[r]);
        const PcgResult pcg = pcg_solve(sys, x, params.pcg_tol, params.pcg_max_iters,
                                        params.exec);
        for (int r = 0; r < sys.num_rows(); ++r)
            if (!sys.frozen[r]) volume.deformed(sys.rows[r]) = x[r];
        update_rotations(volume, params.exec);

        EnergyTraceEntry entry;
        entry.level = level;
        entry.iteration = it;
        entry.energy = evaluate_energy(volume, pose, constraints, params);
        entry.pcg_iterations = pcg.iterations;
        entry.pcg_residual = pcg.relative_residual;
        entry.anomaly = entry.energy.total > prev.total + 1e-9 * prev.total;
        trace.push_back(entry);
        const double rel = (prev.total - entry.energy.total) / std::max(prev.total, 1e-300);
        prev = entry.energy;
        if (rel >= 0 && rel < params.flip_flop_rel_tol) break;
    }
    return trace;
}

std::vector<HierarchyLevel> build_hierarchy(const DeformableVolume& volume,
                                            const std::vector<Correspondence>& constraints,
                                            int levels) {
    if (levels < 1) throw std::invalid_argument("build_hierarchy: levels must be >= 1");
    std::vector<HierarchyLevel> hierarchy;
    hierarchy.push_back({volume, constraints});
    for (int l = 1; l < levels; ++l) {
        const DeformableVolume& fine = hierarchy.back().grid;
        Vec3i cdims;
        for (int k = 0; k < 3; ++k) cdims[k] = (fine.dims()[k] - 1 + 1) / 2 + 1;
        if ((cdims.array() < 2).any())
            throw std::invalid_argument("build_hierarchy: coarsest level below 2^3");
        DeformableVolume coarse(cdims, fine.voxel_size() * 2.0, fine.origin());

        // initialize the coarse deformation from the fine field
        for (int i = 0; i < coarse.num_points(); ++i) {
            const Vec3 xc = coarse.canonical_position(i);
            Vec3 xq = xc;
            for (int k = 0; k < 3; ++k)
                xq[k] = std::clamp(xq[k], fine.origin()[k],
                                   fine.origin()[k] + fine.voxel_size() * (fine.dims()[k] - 1));
            coarse.deformed(i) = fine.interpolate_deformed(xq) + (xc - xq);
            Vec3i nearest;
            for (int k = 0; k < 3; ++k)
                nearest[k] = std::clamp(
                    int(std::lround((xq[k] - fine.origin()[k]) / fine.voxel_size())), 0,
                    fine.dims()[k] - 1);
            coarse.euler(i) = fine.euler(fine.linear_index(nearest.x(), nearest.y(), nearest.z()));
        }
        // coarse activity: cells containing active fine nodes
        for (int i = 0; i < fine.num_points(); ++i) {
            if (!fine.active(i)) continue;
            const Vec3 x = fine.canonical_position(i);
            const TrilinearAnchors a = coarse.trilinear_anchors(x);
            for (int k = 0; k < 8; ++k) coarse.set_active(a.index[k], true);
        }
        // re-anchor all constraints on the coarse lattice
        std::vector<Correspondence> ccons = hierarchy.back().constraints;
        for (Correspondence& c : ccons) {
            const TrilinearAnchors a = coarse.trilinear_anchors(c.canonical);
            c.anchor_index = a.index;
            c.anchor_weight = a.weight;
            for (int k = 0; k < 8; ++k)
                if (a.weight[k] > 0) coarse.set_active(a.index[k], true);
        }
        hierarchy.push_back({std::move(coarse), std::move(ccons)});
    }
    return hierarchy;
}

std::vector<EnergyTraceEntry> solve_coarse_to_fine(
    DeformableVolume& volume, const GlobalPose& pose,
    const std::vector<Correspondence>& constraints, const SolverParams& params) {
    std::vector<HierarchyLevel> hierarchy =
        build_hierarchy(volume, constraints, params.levels);
    std::vector<EnergyTraceEntry> trace;
    for (int l = int(hierarchy.size()) - 1; l >= 1; --l) {
        auto t = flip_flop_solve(hierarchy[l].grid, pose, hierarchy[l].constraints,
                                 params, l);
        trace.insert(trace.end(), t.begin(), t.end());
        // prolongate into the next finer level
        DeformableVolume& fine = (l - 1 == 0) ? volume : hierarchy[l - 1].grid;
        const DeformableVolume& coarse = hierarchy[l].grid;
        for (int i = 0; i < fine.num_points(); ++i) {
            if (!fine.active(i)) continue;
            const Vec3 x = fine.canonical_position(i);
            fine.deformed(i) = coarse.interpolate_deformed(x);
            Vec3i nearest;
            for (int k = 0; k < 3; ++k)
                nearest[k] = std::clamp(
                    int(std::lround((x[k] - coarse.origin()[k]) / coarse.voxel_size())), 0,
                    coarse.dims()[k] - 1);
            fine.euler(i) =
                coarse.euler(coarse.linear_index(nearest.x(), nearest.y(), nearest.z()));
        }
    }
    auto t = flip_flop_solve(volume, pose, constraints, params, 0);
    trace.insert(trace.end(), t.begin(), t.end());
    return trace;
}

IcpResult estimate_global_pose(const GeometryBuffer& buffer,
                               const PointNormalMap& maps, const Intrinsics& intrinsics,
                               const DeformableVolume& volume, const GlobalPose& initial,
                               const IcpParams& params) {
    IcpResult res;
    res.pose = initial;

    struct Source {
        Vec3 q;   // deformed, pre-pose
        Vec3 n0;  // mesh normal, pre-pose
    };
    std::vector<Source> sources;
    const Mat3 r0t = initial.rotation.transpose();
    for (int y = 0; y < buffer.height; ++y)
        for (int x = 0; x < buffer.width; ++x) {
            if (!buffer.valid(x, y)) continue;
            const size_t p = buffer.idx(x, y);
            if (buffer.normal[p].squaredNorm() < 0.5) continue;
            if (!volume.contains(buffer.canonical[p])) continue;
            sources.push_back({volume.interpolate_deformed(buffer.canonical[p]),
                               r0t * buffer.normal[p]});
        }

    double prev_rms = std::numeric_limits<double>::infinity();
    GlobalPose prev_pose = initial;
    for (int it = 0; it < params.max_iters; ++it) {
        Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
        double err = 0, wsum = 0;
        int count = 0;
        for (const Source& s : sources) {
            const Vec3 p = res.pose.apply(s.q);
            const Vec2 uv = intrinsics.project(p);
            Vec3 pa, na;
            if (!sample_point_normal(maps, uv, pa, na)) continue;
            const Vec3 nc = res.pose.rotation * s.n0;
            const Vec3 v = -p.normalized();
            const double w =
                dense_confidence((p - pa).norm(), nc.dot(na), nc.dot(v), params.corr);
            if (w <= 0) continue;
            Eigen::Matrix<double, 6, 1> j;
            j.head<3>() = p.cross(na);
            j.tail<3>() = na;
            const double r = na.dot(p - pa);
            h += w * j * j.transpose();
            g += w * j * r;
            err += w * r * r;
            wsum += w;
            ++count;
        }
        if (count < params.min_correspondences) {
            res.degraded = true;
            return res;
        }
        res.rms = std::sqrt(err / std::max(wsum, 1e-300));
        res.iterations = it + 1;
        // keep a step only if it actually lowers the error: symmetric
        // geometry (e.g. a sphere) leaves near-null directions where the
        // linearized solve would otherwise wander without improving anything
        if (res.rms > prev_rms * (1.0 - std::max(params.rel_tol, params.min_improvement))) {
            res.pose = prev_pose;
            res.rms = prev_rms;
            res.converged = true;
            break;
        }
        prev_rms = res.rms;
        prev_pose = res.pose;
        // damp against ill-conditioned directions
        h += 1e-3 * h.diagonal().maxCoeff() * Eigen::Matrix<double, 6, 6>::Identity();
        const Eigen::Matrix<double, 6, 1> delta = h.ldlt().solve(-g);
        const Vec3 omega = delta.head<3>();
        Mat3 skew;
        skew << 0, -omega.z(), omega.y(), omega.z(), 0, -omega.x(), -omega.y(), omega.x(), 0;
        res.pose.rotation = orthonormalize((Mat3::Identity() + skew) * res.pose.rotation);
        res.pose.translation =
            (Mat3::Identity() + skew) * res.pose.translation + delta.tail<3>();
    }
    return res;
}

}  // namespace wf
