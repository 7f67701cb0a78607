#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "ncf/autodiff.hpp"
#include "ncf/cost.hpp"
#include "ncf/data.hpp"
#include "ncf/model.hpp"
#include "ncf/transport.hpp"
#include "ncf/util.hpp"

namespace ncf {

struct LossWeights {
    double hj_f = 1.0;
    double hj_b = 1.0;
    double mmd_f = 1.0;
    double mmd_b = 1.0;
};

/// Interior space-time points; x is n x d in the training frame, t in [0,tf].
struct CollocationBatch {
    int dim = 0;
    std::vector<double> x;
    std::vector<double> t;

    std::size_t size() const { return t.size(); }
};

/// The backward residual anchors its characteristic step either on the time
/// remaining to the horizon (vanishes identically on the optimal potential)
/// or literally on t, kept selectable for comparison.
enum class BackwardTimeMode { Horizon, Literal };

inline void check_colloc(const CollocationBatch& b, int d, double tf) {
    if (b.dim != d) throw std::invalid_argument("collocation batch: dimension mismatch");
    if (b.x.size() != b.size() * static_cast<std::size_t>(d))
        throw std::invalid_argument("collocation batch: ragged point array");
    for (double t : b.t)
        if (t < 0.0 || t > tf) throw std::invalid_argument("collocation batch: t outside [0, tf]");
}

/// Pointwise defect of the implicit solution identity
///   u(x,t) + t h(grad u) - t grad_u . grad_h(grad u) - u(x - t grad_h, 0).
inline std::vector<double> hj_residuals_forward(const Potential& u, const CostModel& cost,
                                                const CollocationBatch& batch, double tf) {
    const int d = potential_dim(u);
    check_colloc(batch, d, tf);
    std::vector<double> res(batch.size());
    parallel_rows(batch.size(), [&](std::size_t i) {
        const double* x = batch.x.data() + i * static_cast<std::size_t>(d);
        const double t = batch.t[i];
        const PointEval e = eval_potential(u, x, t);
        const std::vector<double> gh = cost.grad_h(e.grad_x);
        double qgh = 0.0;
        std::vector<double> z(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k) {
            qgh += e.grad_x[static_cast<std::size_t>(k)] * gh[static_cast<std::size_t>(k)];
            z[static_cast<std::size_t>(k)] = x[k] - t * gh[static_cast<std::size_t>(k)];
        }
        const PointEval e0 = eval_potential(u, z.data(), 0.0);
        res[i] = e.value + t * cost.h(e.grad_x) - t * qgh - e0.value;
    });
    return res;
}

/// Same identity anchored at the horizon; s is the characteristic step.
inline std::vector<double> hj_residuals_backward(const Potential& u, const CostModel& cost,
                                                 const CollocationBatch& batch, double tf,
                                                 BackwardTimeMode mode = BackwardTimeMode::Horizon) {
    const int d = potential_dim(u);
    check_colloc(batch, d, tf);
    std::vector<double> res(batch.size());
    parallel_rows(batch.size(), [&](std::size_t i) {
        const double* x = batch.x.data() + i * static_cast<std::size_t>(d);
        const double t = batch.t[i];
        const double s = mode == BackwardTimeMode::Horizon ? tf - t : t;
        const PointEval e = eval_potential(u, x, t);
        const std::vector<double> gh = cost.grad_h(e.grad_x);
        double qgh = 0.0;
        std::vector<double> z(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k) {
            qgh += e.grad_x[static_cast<std::size_t>(k)] * gh[static_cast<std::size_t>(k)];
            z[static_cast<std::size_t>(k)] = x[k] + s * gh[static_cast<std::size_t>(k)];
        }
        const PointEval ef = eval_potential(u, z.data(), tf);
        res[i] = e.value - s * cost.h(e.grad_x) + s * qgh - ef.value;
    });
    return res;
}

namespace detail {

inline double pair_dist_total(const double* a, std::size_t n, const double* b, std::size_t m,
                              int d) {
    std::vector<double> partial(n, 0.0);
    parallel_rows(n, [&](std::size_t i) {
        const double* ai = a + i * static_cast<std::size_t>(d);
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double* bj = b + j * static_cast<std::size_t>(d);
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                const double diff = ai[k] - bj[k];
                s += diff * diff;
            }
            acc += std::sqrt(s);
        }
        partial[i] = acc;
    });
    double total = 0.0;
    for (double v : partial) total += v;  // fixed order keeps the sum reproducible
    return total;
}

}  // namespace detail

/// Squared energy distance: the biased V-statistic of the negative Euclidean
/// distance kernel. Nonnegative up to roundoff; zero iff the empirical
/// distributions coincide.
inline double mmd_sq(const double* x, std::size_t n, const double* y, std::size_t m, int d) {
    if (n == 0 || m == 0) throw std::invalid_argument("mmd_sq: empty sample set");
    const double cross = detail::pair_dist_total(x, n, y, m, d);
    const double xx = detail::pair_dist_total(x, n, x, n, d);
    const double yy = detail::pair_dist_total(y, m, y, m, d);
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return 2.0 * cross / (dn * dm) - xx / (dn * dn) - yy / (dm * dm);
}

inline double mmd_sq(const SampleSet& x, const SampleSet& y) {
    if (x.dim != y.dim) throw std::invalid_argument("mmd_sq: dimension mismatch");
    return mmd_sq(x.points.data(), x.size(), y.points.data(), y.size(), x.dim);
}

namespace detail {

inline std::map<int, std::vector<std::size_t>> rows_by_label(const SampleSet& s,
                                                             const char* which) {
    if (s.labels.size() != s.size())
        throw std::invalid_argument(std::string("classwise mmd: unlabeled ") + which + " set");
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < s.size(); ++i) groups[s.labels[i]].push_back(i);
    return groups;
}

inline std::vector<double> gather_rows(const SampleSet& s, const std::vector<std::size_t>& idx) {
    std::vector<double> out(idx.size() * static_cast<std::size_t>(s.dim));
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (int k = 0; k < s.dim; ++k)
            out[i * static_cast<std::size_t>(s.dim) + static_cast<std::size_t>(k)] = s.row(idx[i])[k];
    return out;
}

}  // namespace detail

/// Mean over class labels of the per-class squared discrepancy. Both sets must
/// carry labels and every class present on either side must be present on both.
inline double mmd_sq_classwise(const SampleSet& x, const SampleSet& y) {
    if (x.dim != y.dim) throw std::invalid_argument("mmd_sq_classwise: dimension mismatch");
    auto gx = detail::rows_by_label(x, "source");
    auto gy = detail::rows_by_label(y, "target");
    for (const auto& [label, rows] : gy)
        if (!gx.count(label))
            throw std::invalid_argument("classwise mmd: class " + std::to_string(label) +
                                        " empty in source set");
    double total = 0.0;
    std::size_t k = 0;
    for (const auto& [label, rows] : gx) {
        if (!gy.count(label))
            throw std::invalid_argument("classwise mmd: class " + std::to_string(label) +
                                        " empty in target set");
        const auto xs = detail::gather_rows(x, rows);
        const auto ys = detail::gather_rows(y, gy[label]);
        total += mmd_sq(xs.data(), rows.size(), ys.data(), gy[label].size(), x.dim);
        ++k;
    }
    return total / static_cast<double>(k);
}

// ---- full training objective ------------------------------------------------

/// Everything the objective consumes, already in the training frame.
struct TrainBatch {
    CollocationBatch colloc;
    SampleSet src;
    SampleSet tgt;
};

struct LossValues {
    double total = 0.0;
    double hj_f = 0.0;
    double hj_b = 0.0;
    double mmd_f = 0.0;
    double mmd_b = 0.0;
};

inline void check_weights(const LossWeights& w) {
    if (w.hj_f < 0 || w.hj_b < 0 || w.mmd_f < 0 || w.mmd_b < 0)
        throw std::invalid_argument("loss weights must be nonnegative");
    if (w.mmd_f <= 0.0 && w.mmd_b <= 0.0)
        throw std::invalid_argument("at least one distribution-matching weight must be positive");
}

inline double mean_sq(const std::vector<double>& v) {
    double s = 0.0;
    for (double r : v) s += r * r;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Reference evaluation of the objective (no gradients): residual means plus
/// the two distribution terms from mapping source forward and target backward.
inline LossValues total_loss(const Potential& u, const CostModel& cost, const TrainBatch& batch,
                             const LossWeights& w, double tf, bool class_conditional = false,
                             BackwardTimeMode mode = BackwardTimeMode::Horizon) {
    check_weights(w);
    LossValues out;
    if (w.hj_f > 0.0) out.hj_f = mean_sq(hj_residuals_forward(u, cost, batch.colloc, tf));
    if (w.hj_b > 0.0) out.hj_b = mean_sq(hj_residuals_backward(u, cost, batch.colloc, tf, mode));
    if (w.mmd_f > 0.0) {
        SampleSet mapped = batch.src;
        mapped.points = transport_points(u, cost, MapDirection::Forward, tf, batch.src.points);
        out.mmd_f = class_conditional ? mmd_sq_classwise(mapped, batch.tgt) : mmd_sq(mapped, batch.tgt);
    }
    if (w.mmd_b > 0.0) {
        SampleSet mapped = batch.tgt;
        mapped.points = transport_points(u, cost, MapDirection::Backward, tf, batch.tgt.points);
        out.mmd_b = class_conditional ? mmd_sq_classwise(batch.src, mapped) : mmd_sq(batch.src, mapped);
    }
    out.total = w.hj_f * out.hj_f + w.hj_b * out.hj_b + w.mmd_f * out.mmd_f + w.mmd_b * out.mmd_b;
    return out;
}

// ---- tape emission ----------------------------------------------------------

struct TapeLoss {
    int total = -1;
    int hj_f = -1;
    int hj_b = -1;
    int mmd_f = -1;
    int mmd_b = -1;
};

namespace detail {

/// Gathers the scalar tangent slots of one evaluation into a contiguous block.
inline int gather_grad(Tape& tape, const MlpTapeEval& ev, int d) {
    const int g0 = tape.alloc_block(d);
    for (int k = 0; k < d; ++k)
        tape.affine_into(g0 + k, 0.0, {ev.grad[static_cast<std::size_t>(k)]}, {1.0});
    return g0;
}

/// Emits the mean squared characteristic residual over a collocation batch.
/// step_sign +1 / anchor 0 gives the forward identity; -1 / tf the backward.
inline int emit_hj_term(Tape& tape, const MlpPotential& mlp, int pbase, const CostModel& cost,
                        const CollocationBatch& batch, double tf, bool backward,
                        BackwardTimeMode mode) {
    const int d = mlp.dim;
    const std::size_t n = batch.size();
    std::vector<int> squares(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = batch.x.data() + i * static_cast<std::size_t>(d);
        const double t = batch.t[i];
        const double step = backward ? (mode == BackwardTimeMode::Horizon ? tf - t : t) : t;
        const double sign = backward ? 1.0 : -1.0;
        const MlpTapeEval ev = emit_mlp_const_input(tape, mlp, pbase, x, t, d);
        const int g0 = gather_grad(tape, ev, d);
        const auto ham = cost.emit(tape, g0, d);
        std::vector<int> z(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k)
            z[static_cast<std::size_t>(k)] =
                tape.affine(x[k], {ham.grad0 + k}, {sign * step});
        const int u_end = emit_mlp_var_input(tape, mlp, pbase, z, backward ? tf : 0.0);
        const int res = tape.affine(0.0, {ev.value, ham.h, ham.q_dot_gh, u_end},
                                    {1.0, -sign * step, sign * step, -1.0});
        squares[i] = tape.square(res);
    }
    return tape.affine(0.0, squares, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

/// Maps every sample of `pts` through one characteristic step on the tape and
/// writes the images into a contiguous block (n x d).
inline int emit_mapped_block(Tape& tape, const MlpPotential& mlp, int pbase, const CostModel& cost,
                             const std::vector<double>& pts, double eval_t, double step,
                             double sign) {
    const int d = mlp.dim;
    const std::size_t n = pts.size() / static_cast<std::size_t>(d);
    const int block = tape.alloc_block(static_cast<int>(n) * d);
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = pts.data() + i * static_cast<std::size_t>(d);
        const MlpTapeEval ev = emit_mlp_const_input(tape, mlp, pbase, x, eval_t, d);
        const int g0 = gather_grad(tape, ev, d);
        const auto ham = cost.emit(tape, g0, d);
        for (int k = 0; k < d; ++k)
            tape.affine_into(block + static_cast<int>(i) * d + k, x[k], {ham.grad0 + k},
                             {sign * step});
    }
    return block;
}

/// mmd^2 between an on-tape block and a constant set, V-statistic weights.
inline int emit_mmd_sq(Tape& tape, int block, std::size_t n, const std::vector<double>& other,
                       std::size_t m, int d) {
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    const int cross = tape.pair_dist_sum_const(block, static_cast<int>(n), other.data(),
                                               static_cast<int>(m), d);
    const int self = tape.pair_dist_sum(block, static_cast<int>(n), block, static_cast<int>(n), d);
    const double const_term = pair_dist_total(other.data(), m, other.data(), m, d) / (dm * dm);
    return tape.affine(-const_term, {cross, self}, {2.0 / (dn * dm), -1.0 / (dn * dn)});
}

/// Class-conditional variant: the mapped block is regrouped per class and each
/// class compared against the same class of the constant set.
inline int emit_mmd_sq_classwise(Tape& tape, int block, const SampleSet& mapped_meta,
                                 const SampleSet& other, int d) {
    auto gm = rows_by_label(mapped_meta, "mapped");
    auto go = rows_by_label(other, "opposite");
    for (const auto& [label, rows] : go)
        if (!gm.count(label))
            throw std::invalid_argument("classwise mmd: class " + std::to_string(label) +
                                        " missing from mapped set");
    std::vector<int> terms;
    for (const auto& [label, rows] : gm) {
        if (!go.count(label))
            throw std::invalid_argument("classwise mmd: class " + std::to_string(label) +
                                        " missing from opposite set");
        const int sub = tape.alloc_block(static_cast<int>(rows.size()) * d);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int k = 0; k < d; ++k)
                tape.affine_into(sub + static_cast<int>(i) * d + k, 0.0,
                                 {block + static_cast<int>(rows[i]) * d + k}, {1.0});
        const auto ys = gather_rows(other, go[label]);
        terms.push_back(emit_mmd_sq(tape, sub, rows.size(), ys, go[label].size(), d));
    }
    return tape.affine(0.0, terms, std::vector<double>(terms.size(), 1.0 / static_cast<double>(terms.size())));
}

}  // namespace detail

/// Emits the weighted objective onto the tape and returns the component slots.
/// Terms with zero weight are skipped entirely.
inline TapeLoss emit_total_loss(Tape& tape, const MlpPotential& mlp, int pbase,
                                const CostModel& cost, const TrainBatch& batch,
                                const LossWeights& w, double tf, bool class_conditional = false,
                                BackwardTimeMode mode = BackwardTimeMode::Horizon) {
    check_weights(w);
    check_colloc(batch.colloc, mlp.dim, tf);
    const int d = mlp.dim;
    TapeLoss out;
    std::vector<int> slots;
    std::vector<double> coefs;

    if (w.hj_f > 0.0) {
        out.hj_f = detail::emit_hj_term(tape, mlp, pbase, cost, batch.colloc, tf, false, mode);
        slots.push_back(out.hj_f);
        coefs.push_back(w.hj_f);
    }
    if (w.hj_b > 0.0) {
        out.hj_b = detail::emit_hj_term(tape, mlp, pbase, cost, batch.colloc, tf, true, mode);
        slots.push_back(out.hj_b);
        coefs.push_back(w.hj_b);
    }
    if (w.mmd_f > 0.0) {
        const int mapped =
            detail::emit_mapped_block(tape, mlp, pbase, cost, batch.src.points, 0.0, tf, 1.0);
        if (class_conditional) {
            out.mmd_f = detail::emit_mmd_sq_classwise(tape, mapped, batch.src, batch.tgt, d);
        } else {
            out.mmd_f = detail::emit_mmd_sq(tape, mapped, batch.src.size(), batch.tgt.points,
                                            batch.tgt.size(), d);
        }
        slots.push_back(out.mmd_f);
        coefs.push_back(w.mmd_f);
    }
    if (w.mmd_b > 0.0) {
        const int mapped =
            detail::emit_mapped_block(tape, mlp, pbase, cost, batch.tgt.points, tf, tf, -1.0);
        if (class_conditional) {
            out.mmd_b = detail::emit_mmd_sq_classwise(tape, mapped, batch.tgt, batch.src, d);
        } else {
            out.mmd_b = detail::emit_mmd_sq(tape, mapped, batch.tgt.size(), batch.src.points,
                                            batch.src.size(), d);
        }
        slots.push_back(out.mmd_b);
        coefs.push_back(w.mmd_b);
    }
    out.total = tape.affine(0.0, slots, coefs);
    return out;
}

}  // namespace ncf
