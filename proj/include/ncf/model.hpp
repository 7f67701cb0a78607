#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ncf/autodiff.hpp"
#include "ncf/linalg.hpp"
#include "ncf/rng.hpp"

namespace ncf {

struct Activation {
    Act kind = Act::Softplus;
    double beta = 100.0;  // softplus sharpness; ignored for tanh
};

/// Scalar space-time potential u(x,t) parameterized by an MLP over the
/// features [x, t] (optionally with |x|^2 appended, which lets the network
/// represent affine maps exactly). kappa > 0 switches the interior layers to
/// residual blocks y + kappa * A * act(y) + b; all hidden widths must then be
/// equal.
struct MlpPotential {
    int dim = 0;
    std::vector<int> hidden;
    Activation act;
    double kappa = 0.0;
    bool quad_input = false;
    std::vector<double> params;

    int n_features() const { return dim + 1 + (quad_input ? 1 : 0); }

    struct LayerShape {
        int in = 0;
        int out = 0;
        std::size_t w_ofs = 0;
        std::size_t b_ofs = 0;
    };

    std::vector<LayerShape> layer_shapes() const {
        std::vector<LayerShape> shapes;
        std::size_t ofs = 0;
        int in = n_features();
        for (std::size_t i = 0; i <= hidden.size(); ++i) {
            const int out = i < hidden.size() ? hidden[i] : 1;
            shapes.push_back({in, out, ofs, ofs + static_cast<std::size_t>(in) * out});
            ofs += static_cast<std::size_t>(in) * out + out;
            in = out;
        }
        return shapes;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& s : layer_shapes()) n += static_cast<std::size_t>(s.in) * s.out + s.out;
        return n;
    }
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero, drawn in layer order so a
/// seed pins the whole parameter vector.
inline MlpPotential mlp_init(int dim, const std::vector<int>& hidden, Activation act,
                             double kappa, bool quad_input, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("mlp_init: dimension must be positive");
    for (int w : hidden)
        if (w < 1) throw std::invalid_argument("mlp_init: zero or negative hidden width");
    if (kappa > 0.0)
        for (int w : hidden)
            if (w != hidden.front())
                throw std::invalid_argument("mlp_init: residual blocks need equal hidden widths");

    MlpPotential m;
    m.dim = dim;
    m.hidden = hidden;
    m.act = act;
    m.kappa = kappa;
    m.quad_input = quad_input;
    m.params.assign(m.param_count(), 0.0);

    Rng rng(seed);
    for (const auto& s : m.layer_shapes()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
        for (int i = 0; i < s.in * s.out; ++i)
            m.params[s.w_ofs + static_cast<std::size_t>(i)] = rng.uniform(-bound, bound);
        // biases stay zero
    }
    return m;
}

/// Quadratic-in-space potential u(x,t) = -(x'T2(t)x/2 + T1(t)'x + T0(t)).
/// Coefficients come either from piecewise-linear interpolation between time
/// knots or from the closed-form law of a Gaussian pair held spectrally.
struct QuadraticPotential {
    enum class Law { Knots, GaussianOptimal };

    int dim = 0;
    double tf = 1.0;
    Law law = Law::Knots;

    // knot mode
    std::vector<double> knot_t;
    std::vector<Mat> theta2;
    std::vector<std::vector<double>> theta1;
    std::vector<double> theta0;

    // closed-form mode: A = basis diag(a_eig) basis' plus the two means
    Mat basis;
    std::vector<double> a_eig;
    std::vector<double> b_mu, b_nu;

    struct Coeffs {
        Mat t2;
        std::vector<double> t1;
        double t0 = 0.0;
    };

    static QuadraticPotential from_knots(double tf, std::vector<double> ts, std::vector<Mat> t2s,
                                         std::vector<std::vector<double>> t1s,
                                         std::vector<double> t0s) {
        if (ts.size() < 2 || ts.size() != t2s.size() || ts.size() != t1s.size() ||
            ts.size() != t0s.size())
            throw std::invalid_argument("QuadraticPotential: inconsistent knot arrays");
        QuadraticPotential q;
        q.dim = t2s.front().rows;
        q.tf = tf;
        q.law = Law::Knots;
        q.knot_t = std::move(ts);
        q.theta2 = std::move(t2s);
        q.theta1 = std::move(t1s);
        q.theta0 = std::move(t0s);
        return q;
    }

    Coeffs coeffs(double t) const {
        check_time(t);
        if (law == Law::Knots) return knot_coeffs(t, false);
        return gaussian_coeffs(t, false);
    }

    /// Time derivative of the coefficients (right-sided at interior knots).
    Coeffs coeffs_dt(double t) const {
        check_time(t);
        if (law == Law::Knots) return knot_coeffs(t, true);
        return gaussian_coeffs(t, true);
    }

private:
    void check_time(double t) const {
        if (t < -1e-12 || t > tf + 1e-12)
            throw std::out_of_range("QuadraticPotential: t outside [0, tf]");
    }

    Coeffs knot_coeffs(double t, bool deriv) const {
        std::size_t k = 0;
        while (k + 2 < knot_t.size() && t >= knot_t[k + 1]) ++k;
        const double span = knot_t[k + 1] - knot_t[k];
        const double w = (t - knot_t[k]) / span;
        Coeffs c;
        c.t2 = Mat(dim, dim);
        c.t1.assign(static_cast<std::size_t>(dim), 0.0);
        if (deriv) {
            for (std::size_t i = 0; i < c.t2.a.size(); ++i)
                c.t2.a[i] = (theta2[k + 1].a[i] - theta2[k].a[i]) / span;
            for (int i = 0; i < dim; ++i)
                c.t1[static_cast<std::size_t>(i)] =
                    (theta1[k + 1][static_cast<std::size_t>(i)] - theta1[k][static_cast<std::size_t>(i)]) / span;
            c.t0 = (theta0[k + 1] - theta0[k]) / span;
        } else {
            for (std::size_t i = 0; i < c.t2.a.size(); ++i)
                c.t2.a[i] = (1.0 - w) * theta2[k].a[i] + w * theta2[k + 1].a[i];
            for (int i = 0; i < dim; ++i)
                c.t1[static_cast<std::size_t>(i)] = (1.0 - w) * theta1[k][static_cast<std::size_t>(i)] +
                                                    w * theta1[k + 1][static_cast<std::size_t>(i)];
            c.t0 = (1.0 - w) * theta0[k] + w * theta0[k + 1];
        }
        return c;
    }

    Coeffs gaussian_coeffs(double t, bool deriv) const {
        const int n = dim;
        // w = A b_mu - b_nu in the eigenbasis of A
        std::vector<double> w(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += basis(j, i) * b_mu[static_cast<std::size_t>(j)];
            w[static_cast<std::size_t>(i)] = a_eig[static_cast<std::size_t>(i)] * s;
        }
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += basis(j, i) * b_nu[static_cast<std::size_t>(j)];
            w[static_cast<std::size_t>(i)] -= s;
        }

        Coeffs c;
        c.t2 = Mat(n, n);
        c.t1.assign(static_cast<std::size_t>(n), 0.0);
        std::vector<double> diag2(static_cast<std::size_t>(n)), diag1(static_cast<std::size_t>(n));
        double t0 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double a = a_eig[static_cast<std::size_t>(i)];
            const double b = 1.0 + t * (a - 1.0);
            if (std::abs(b) < 1e-14)
                throw std::runtime_error("QuadraticPotential: singular time law");
            const double wi = w[static_cast<std::size_t>(i)];
            if (!deriv) {
                diag2[static_cast<std::size_t>(i)] = (1.0 - a) / b;
                diag1[static_cast<std::size_t>(i)] = wi / b;
                t0 += 0.5 * t * wi * wi / b;
            } else {
                diag2[static_cast<std::size_t>(i)] = (1.0 - a) * (1.0 - a) / (b * b);
                diag1[static_cast<std::size_t>(i)] = -wi * (a - 1.0) / (b * b);
                t0 += 0.5 * wi * wi / (b * b);
            }
        }
        c.t0 = t0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s2 = 0.0;
                for (int k = 0; k < n; ++k)
                    s2 += basis(i, k) * diag2[static_cast<std::size_t>(k)] * basis(j, k);
                c.t2(i, j) = s2;
            }
        for (int i = 0; i < n; ++i) {
            double s1 = 0.0;
            for (int k = 0; k < n; ++k) s1 += basis(i, k) * diag1[static_cast<std::size_t>(k)];
            c.t1[static_cast<std::size_t>(i)] = s1;
        }
        return c;
    }
};

using Potential = std::variant<MlpPotential, QuadraticPotential>;

inline int potential_dim(const Potential& p) {
    return std::visit([](const auto& m) { return m.dim; }, p);
}

struct PointEval {
    double value = 0.0;
    std::vector<double> grad_x;  // spatial gradient, d entries
    double du_dt = 0.0;          // filled only when requested
};

namespace detail {

/// Forward pass with m tangent directions carried alongside every neuron.
/// feats/tans are caller-built feature vectors (x, t, optional |x|^2).
inline void mlp_forward_dual(const MlpPotential& mlp, const std::vector<double>& feats,
                             const std::vector<std::vector<double>>& tans, double& value,
                             std::vector<double>& out_tans) {
    const auto shapes = mlp.layer_shapes();
    const std::size_t m = tans.size();
    std::vector<double> a = feats;
    std::vector<std::vector<double>> ta = tans;
    std::vector<double> z, s;
    std::vector<std::vector<double>> tz(m);

    const bool residual = mlp.kappa > 0.0;
    for (std::size_t li = 0; li < shapes.size(); ++li) {
        const auto& sh = shapes[li];
        const double* W = mlp.params.data() + sh.w_ofs;
        const double* b = mlp.params.data() + sh.b_ofs;
        const bool inner = residual && li > 0 && li + 1 < shapes.size();

        if (inner) {
            // y <- y + kappa * A * act(y) + b
            const int w = sh.out;
            s.assign(static_cast<std::size_t>(w), 0.0);
            std::vector<double> fp(static_cast<std::size_t>(w));
            for (int j = 0; j < w; ++j) {
                s[static_cast<std::size_t>(j)] = act_eval(mlp.act.kind, mlp.act.beta, a[static_cast<std::size_t>(j)]);
                fp[static_cast<std::size_t>(j)] = act_d1(mlp.act.kind, mlp.act.beta, a[static_cast<std::size_t>(j)]);
            }
            std::vector<double> y = a;
            for (int j = 0; j < w; ++j) {
                double acc = 0.0;
                for (int k = 0; k < w; ++k) acc += W[j * w + k] * s[static_cast<std::size_t>(k)];
                y[static_cast<std::size_t>(j)] += mlp.kappa * acc + b[j];
            }
            for (std::size_t r = 0; r < m; ++r) {
                std::vector<double> ts(static_cast<std::size_t>(w));
                for (int j = 0; j < w; ++j)
                    ts[static_cast<std::size_t>(j)] = fp[static_cast<std::size_t>(j)] * ta[r][static_cast<std::size_t>(j)];
                for (int j = 0; j < w; ++j) {
                    double acc = 0.0;
                    for (int k = 0; k < w; ++k) acc += W[j * w + k] * ts[static_cast<std::size_t>(k)];
                    ta[r][static_cast<std::size_t>(j)] += mlp.kappa * acc;
                }
            }
            a = std::move(y);
            continue;
        }

        z.assign(static_cast<std::size_t>(sh.out), 0.0);
        for (int j = 0; j < sh.out; ++j) {
            double acc = b[j];
            for (int k = 0; k < sh.in; ++k) acc += W[j * sh.in + k] * a[static_cast<std::size_t>(k)];
            z[static_cast<std::size_t>(j)] = acc;
        }
        for (std::size_t r = 0; r < m; ++r) {
            tz[r].assign(static_cast<std::size_t>(sh.out), 0.0);
            for (int j = 0; j < sh.out; ++j) {
                double acc = 0.0;
                for (int k = 0; k < sh.in; ++k) acc += W[j * sh.in + k] * ta[r][static_cast<std::size_t>(k)];
                tz[r][static_cast<std::size_t>(j)] = acc;
            }
        }

        const bool last = li + 1 == shapes.size();
        if (last || (residual && li == 0)) {
            a = z;
            for (std::size_t r = 0; r < m; ++r) ta[r] = tz[r];
        } else {
            a.assign(static_cast<std::size_t>(sh.out), 0.0);
            for (int j = 0; j < sh.out; ++j) {
                a[static_cast<std::size_t>(j)] = act_eval(mlp.act.kind, mlp.act.beta, z[static_cast<std::size_t>(j)]);
            }
            for (std::size_t r = 0; r < m; ++r)
                for (int j = 0; j < sh.out; ++j)
                    tz[r][static_cast<std::size_t>(j)] *= act_d1(mlp.act.kind, mlp.act.beta, z[static_cast<std::size_t>(j)]);
            for (std::size_t r = 0; r < m; ++r) ta[r] = tz[r];
        }
    }

    value = a[0];
    out_tans.resize(m);
    for (std::size_t r = 0; r < m; ++r) out_tans[r] = ta[r][0];
}

inline void build_features(const MlpPotential& mlp, const double* x, double t,
                           std::vector<double>& feats) {
    feats.assign(static_cast<std::size_t>(mlp.n_features()), 0.0);
    for (int k = 0; k < mlp.dim; ++k) feats[static_cast<std::size_t>(k)] = x[k];
    feats[static_cast<std::size_t>(mlp.dim)] = t;
    if (mlp.quad_input) {
        double s = 0.0;
        for (int k = 0; k < mlp.dim; ++k) s += x[k] * x[k];
        feats[static_cast<std::size_t>(mlp.dim) + 1] = s;
    }
}

/// Tangent of the feature vector along input coordinate r (r == dim is time).
inline void feature_seed(const MlpPotential& mlp, const double* x, int r,
                         std::vector<double>& seed) {
    seed.assign(static_cast<std::size_t>(mlp.n_features()), 0.0);
    seed[static_cast<std::size_t>(r)] = 1.0;
    if (mlp.quad_input && r < mlp.dim)
        seed[static_cast<std::size_t>(mlp.dim) + 1] = 2.0 * x[r];
}

}  // namespace detail

inline PointEval eval_potential(const MlpPotential& mlp, const double* x, double t,
                                bool want_time = false) {
    std::vector<double> feats;
    detail::build_features(mlp, x, t, feats);
    const int m = mlp.dim + (want_time ? 1 : 0);
    std::vector<std::vector<double>> seeds(static_cast<std::size_t>(m));
    for (int r = 0; r < m; ++r) detail::feature_seed(mlp, x, r, seeds[static_cast<std::size_t>(r)]);

    PointEval out;
    std::vector<double> tans;
    detail::mlp_forward_dual(mlp, feats, seeds, out.value, tans);
    out.grad_x.assign(tans.begin(), tans.begin() + mlp.dim);
    if (want_time) out.du_dt = tans[static_cast<std::size_t>(mlp.dim)];
    return out;
}

inline PointEval eval_potential(const QuadraticPotential& q, const double* x, double t,
                                bool want_time = false) {
    const auto c = q.coeffs(t);
    PointEval out;
    out.grad_x.assign(static_cast<std::size_t>(q.dim), 0.0);
    double quad = 0.0, lin = 0.0;
    for (int i = 0; i < q.dim; ++i) {
        double row = 0.0;
        for (int j = 0; j < q.dim; ++j) row += c.t2(i, j) * x[j];
        quad += x[i] * row;
        lin += c.t1[static_cast<std::size_t>(i)] * x[i];
        out.grad_x[static_cast<std::size_t>(i)] = -(row + c.t1[static_cast<std::size_t>(i)]);
    }
    out.value = -(0.5 * quad + lin + c.t0);
    if (want_time) {
        const auto cd = q.coeffs_dt(t);
        double quad_d = 0.0, lin_d = 0.0;
        for (int i = 0; i < q.dim; ++i) {
            double row = 0.0;
            for (int j = 0; j < q.dim; ++j) row += cd.t2(i, j) * x[j];
            quad_d += x[i] * row;
            lin_d += cd.t1[static_cast<std::size_t>(i)] * x[i];
        }
        out.du_dt = -(0.5 * quad_d + lin_d + cd.t0);
    }
    return out;
}

inline PointEval eval_potential(const Potential& p, const double* x, double t,
                                bool want_time = false) {
    return std::visit([&](const auto& m) { return eval_potential(m, x, t, want_time); }, p);
}

struct DualBatch {
    std::vector<double> values;          // n
    std::vector<double> input_grads;     // n x (d+1), time derivative last
};

/// Value and full input gradient (spatial + time) at each row of points,
/// rows laid out as [x_0 .. x_{d-1}, t].
inline DualBatch eval_with_input_grad(const Potential& p, const std::vector<double>& points,
                                      int d) {
    if (d < 1 || points.size() % static_cast<std::size_t>(d + 1) != 0)
        throw std::invalid_argument("eval_with_input_grad: rows must have d+1 entries");
    if (potential_dim(p) != d)
        throw std::invalid_argument("eval_with_input_grad: model dimension mismatch");
    const std::size_t n = points.size() / static_cast<std::size_t>(d + 1);
    DualBatch out;
    out.values.resize(n);
    out.input_grads.resize(n * static_cast<std::size_t>(d + 1));
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = points.data() + i * static_cast<std::size_t>(d + 1);
        const PointEval e = eval_potential(p, row, row[d], true);
        out.values[i] = e.value;
        for (int k = 0; k < d; ++k)
            out.input_grads[i * static_cast<std::size_t>(d + 1) + static_cast<std::size_t>(k)] =
                e.grad_x[static_cast<std::size_t>(k)];
        out.input_grads[i * static_cast<std::size_t>(d + 1) + static_cast<std::size_t>(d)] = e.du_dt;
    }
    return out;
}

// ---- tape emission ---------------------------------------------------------

struct MlpTapeEval {
    int value = -1;
    std::vector<int> grad;  // tangent slots, one per requested direction
};

namespace detail {

/// Shared emission worker. feat0 is a contiguous feature block; tan0 holds the
/// starts of contiguous tangent blocks (same width as features).
inline MlpTapeEval emit_mlp_blocks(Tape& tape, const MlpPotential& mlp, int pbase, int feat0,
                                   const std::vector<int>& tan0) {
    const auto shapes = mlp.layer_shapes();
    const std::size_t m = tan0.size();
    const bool residual = mlp.kappa > 0.0;

    int a = feat0;
    int na = mlp.n_features();
    std::vector<int> ta = tan0;

    for (std::size_t li = 0; li < shapes.size(); ++li) {
        const auto& sh = shapes[li];
        const int w0 = pbase + static_cast<int>(sh.w_ofs);
        const int b0 = pbase + static_cast<int>(sh.b_ofs);
        const bool inner = residual && li > 0 && li + 1 < shapes.size();

        if (inner) {
            const int w = sh.out;
            const int s = tape.act_eval(mlp.act.kind, mlp.act.beta, a, w);
            const int fp = m > 0 ? tape.act_deriv(mlp.act.kind, mlp.act.beta, a, w) : -1;
            const int as = tape.dense(s, w, w0, -1, w);
            int y = tape.add_scaled(a, as, w, mlp.kappa);
            y = tape.add_scaled(y, b0, w, 1.0);
            for (std::size_t r = 0; r < m; ++r) {
                const int ts = tape.mul_ew(fp, ta[r], w);
                const int ats = tape.dense(ts, w, w0, -1, w);
                ta[r] = tape.add_scaled(ta[r], ats, w, mlp.kappa);
            }
            a = y;
            na = w;
            continue;
        }

        const int z = tape.dense(a, na, w0, b0, sh.out);
        std::vector<int> tz(m);
        for (std::size_t r = 0; r < m; ++r) tz[r] = tape.dense(ta[r], na, w0, -1, sh.out);

        const bool last = li + 1 == shapes.size();
        if (last || (residual && li == 0)) {
            a = z;
            ta = tz;
        } else {
            a = tape.act_eval(mlp.act.kind, mlp.act.beta, z, sh.out);
            if (m > 0) {
                const int fp = tape.act_deriv(mlp.act.kind, mlp.act.beta, z, sh.out);
                for (std::size_t r = 0; r < m; ++r) ta[r] = tape.mul_ew(fp, tz[r], sh.out);
            }
        }
        na = sh.out;
    }

    MlpTapeEval out;
    out.value = a;
    out.grad = ta;
    return out;
}

}  // namespace detail

/// Emission for constant input points (collocation / sample batches).
/// n_dirs = 0 gives value only, d gives the spatial gradient, d+1 adds time.
inline MlpTapeEval emit_mlp_const_input(Tape& tape, const MlpPotential& mlp, int pbase,
                                        const double* x, double t, int n_dirs) {
    std::vector<double> feats;
    detail::build_features(mlp, x, t, feats);
    const int feat0 = tape.constants(feats.data(), static_cast<int>(feats.size()));
    std::vector<int> tan0(static_cast<std::size_t>(n_dirs));
    std::vector<double> seed;
    for (int r = 0; r < n_dirs; ++r) {
        detail::feature_seed(mlp, x, r, seed);
        tan0[static_cast<std::size_t>(r)] = tape.constants(seed.data(), static_cast<int>(seed.size()));
    }
    return detail::emit_mlp_blocks(tape, mlp, pbase, feat0, tan0);
}

/// Emission for an input point that lives on the tape (d variable slots),
/// evaluated at a fixed time. Value only; no tangents are propagated.
inline int emit_mlp_var_input(Tape& tape, const MlpPotential& mlp, int pbase,
                              const std::vector<int>& x_slots, double t) {
    if (static_cast<int>(x_slots.size()) != mlp.dim)
        throw std::invalid_argument("emit_mlp_var_input: wrong point width");
    const int F = mlp.n_features();
    const int feat0 = tape.alloc_block(F);
    for (int k = 0; k < mlp.dim; ++k)
        tape.affine_into(feat0 + k, 0.0, {x_slots[static_cast<std::size_t>(k)]}, {1.0});
    tape.affine_into(feat0 + mlp.dim, t, {}, {});
    if (mlp.quad_input) {
        // |x|^2 from the variable slots; contiguity of the block is preserved
        // by writing the dot product into the reserved slot via affine chain.
        std::vector<int> sq(static_cast<std::size_t>(mlp.dim));
        std::vector<double> ones(static_cast<std::size_t>(mlp.dim), 1.0);
        for (int k = 0; k < mlp.dim; ++k)
            sq[static_cast<std::size_t>(k)] = tape.square(x_slots[static_cast<std::size_t>(k)]);
        tape.affine_into(feat0 + mlp.dim + 1, 0.0, sq, ones);
    }
    return detail::emit_mlp_blocks(tape, mlp, pbase, feat0, {}).value;
}

struct LossGrad {
    double value = 0.0;
    std::vector<double> grad;
};

/// Runs a caller-supplied composition over a fresh tape seeded with the model
/// parameters as leaves and differentiates the resulting scalar with respect
/// to every parameter. The builder receives (tape, param_base_slot) and must
/// return the loss slot.
template <typename Builder>
LossGrad loss_param_grad(const MlpPotential& mlp, Builder&& build) {
    Tape tape;
    const int pbase = tape.constants(mlp.params.data(), static_cast<int>(mlp.params.size()));
    const int loss = build(tape, pbase);
    if (!std::isfinite(tape.val(loss))) {
        const std::string op = tape.first_non_finite();
        throw std::runtime_error("loss_param_grad: non-finite value" +
                                 (op.empty() ? std::string() : " (op " + op + ")"));
    }
    tape.backward(loss);
    LossGrad out;
    out.value = tape.val(loss);
    out.grad.resize(mlp.params.size());
    for (std::size_t i = 0; i < mlp.params.size(); ++i)
        out.grad[i] = tape.adj(pbase + static_cast<int>(i));
    return out;
}

}  // namespace ncf
