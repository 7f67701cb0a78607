#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncf {

enum class Act : std::uint8_t { Tanh, Softplus };

namespace detail {

inline double softplus(double z, double beta) {
    // overflow-safe in both tails
    if (z > 0.0) return z + std::log1p(std::exp(-beta * z)) / beta;
    return std::log1p(std::exp(beta * z)) / beta;
}

inline double softplus_d1(double z, double beta) {
    if (z > 0.0) return 1.0 / (1.0 + std::exp(-beta * z));
    const double e = std::exp(beta * z);
    return e / (1.0 + e);
}

inline double act_eval(Act a, double beta, double z) {
    return a == Act::Tanh ? std::tanh(z) : softplus(z, beta);
}

inline double act_d1(Act a, double beta, double z) {
    if (a == Act::Tanh) {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    return softplus_d1(z, beta);
}

inline double act_d2(Act a, double beta, double z) {
    if (a == Act::Tanh) {
        const double t = std::tanh(z);
        return -2.0 * t * (1.0 - t * t);
    }
    const double s = softplus_d1(z, beta);
    return beta * s * (1.0 - s);
}

}  // namespace detail

/// Scalar computation recorded as a sequence of fused array operations over a
/// flat slot store. Forward values are computed eagerly while the graph is
/// being emitted; backward() then accumulates adjoints in reverse emission
/// order, which makes repeated evaluations bitwise reproducible.
///
/// Directional derivatives with respect to model inputs are not a separate
/// mechanism: callers emit the tangent recurrences through the same ops, so
/// input gradients live on the tape as ordinary differentiable slots.
class Tape {
public:
    // Per-op slot conventions (out is always the first slot of a block written
    // exactly once):
    //   Affine      out[0]    = c0 + sum_k coef[k] * val[arg[k]]        (scattered args)
    //   AddScaled   out[j]    = val[in0+j] + c0 * val[in1+j]
    //   Mul         out[0]    = val[in0] * val[in1]
    //   MulEw       out[j]    = val[in0+j] * val[in1+j]
    //   Square      out[0]    = val[in0]^2
    //   Sqrt        out[0]    = sqrt(val[in0])
    //   PowC        out[0]    = val[in0]^c0
    //   Dot         out[0]    = sum_k val[in0+k] * val[in1+k]
    //   Dense       out[j]    = bias_j + sum_k W[j,k] * val[in0+k], W row-major at in1, bias at in2
    //   ActEval     out[j]    = f(val[in0+j])          (beta in c0)
    //   ActDeriv    out[j]    = f'(val[in0+j])
    //   PairDistVv  out[0]    = sum_ij |A_i - B_j|, A rows x d at in0, B rows_b x d at in1
    //   PairDistVc  as above with B taken from captured constants at aux
    enum class Op : std::uint8_t {
        Affine, AddScaled, Mul, MulEw, Square, Sqrt, PowC, Dot,
        Dense, ActEval, ActDeriv, PairDistVv, PairDistVc
    };

    struct Node {
        Op op;
        Act act = Act::Tanh;
        double c0 = 0.0;
        int out = -1;
        int n_out = 1;
        int in0 = -1;
        int in1 = -1;
        int in2 = -1;
        int n = 0;
        int rows = 0;
        int rows_b = 0;
        int aux = -1;
        int n_aux = 0;
    };

    int constant(double v) {
        val_.push_back(v);
        return static_cast<int>(val_.size()) - 1;
    }

    int constants(const double* p, int n) {
        const int base = static_cast<int>(val_.size());
        val_.insert(val_.end(), p, p + n);
        return base;
    }

    /// Reserves a block whose slots will each be written later by one op.
    int alloc_block(int n) {
        const int base = static_cast<int>(val_.size());
        val_.resize(val_.size() + static_cast<std::size_t>(n),
                    std::numeric_limits<double>::quiet_NaN());
        return base;
    }

    double val(int slot) const { return val_[static_cast<std::size_t>(slot)]; }
    double adj(int slot) const { return adj_[static_cast<std::size_t>(slot)]; }
    std::size_t num_slots() const { return val_.size(); }
    std::size_t num_nodes() const { return nodes_.size(); }

    int affine(double c0, const std::vector<int>& slots, const std::vector<double>& coefs) {
        return affine_into(alloc_block(1), c0, slots, coefs);
    }

    int affine_into(int out, double c0, const std::vector<int>& slots,
                    const std::vector<double>& coefs) {
        if (slots.size() != coefs.size()) throw std::invalid_argument("affine: arg/coef mismatch");
        Node nd;
        nd.op = Op::Affine;
        nd.c0 = c0;
        nd.out = out;
        nd.aux = static_cast<int>(args_.size());
        nd.n_aux = static_cast<int>(slots.size());
        double s = c0;
        for (std::size_t k = 0; k < slots.size(); ++k) {
            args_.push_back(slots[k]);
            coefs_.push_back(coefs[k]);
            s += coefs[k] * val_[static_cast<std::size_t>(slots[k])];
        }
        val_[static_cast<std::size_t>(out)] = s;
        nodes_.push_back(nd);
        return out;
    }

    int add(int a, int b) { return affine(0.0, {a, b}, {1.0, 1.0}); }
    int sub(int a, int b) { return affine(0.0, {a, b}, {1.0, -1.0}); }
    int scale(double c, int a) { return affine(0.0, {a}, {c}); }

    int add_scaled(int a0, int b0, int n, double c) {
        return add_scaled_into(alloc_block(n), a0, b0, n, c);
    }

    int add_scaled_into(int out, int a0, int b0, int n, double c) {
        Node nd;
        nd.op = Op::AddScaled;
        nd.c0 = c;
        nd.out = out;
        nd.n_out = n;
        nd.in0 = a0;
        nd.in1 = b0;
        for (int j = 0; j < n; ++j)
            val_[static_cast<std::size_t>(out + j)] =
                val_[static_cast<std::size_t>(a0 + j)] + c * val_[static_cast<std::size_t>(b0 + j)];
        nodes_.push_back(nd);
        return out;
    }

    int mul(int a, int b) {
        Node nd;
        nd.op = Op::Mul;
        nd.out = alloc_block(1);
        nd.in0 = a;
        nd.in1 = b;
        val_[static_cast<std::size_t>(nd.out)] =
            val_[static_cast<std::size_t>(a)] * val_[static_cast<std::size_t>(b)];
        nodes_.push_back(nd);
        return nd.out;
    }

    int mul_ew(int a0, int b0, int n) { return mul_ew_into(alloc_block(n), a0, b0, n); }

    int mul_ew_into(int out, int a0, int b0, int n) {
        Node nd;
        nd.op = Op::MulEw;
        nd.out = out;
        nd.n_out = n;
        nd.in0 = a0;
        nd.in1 = b0;
        for (int j = 0; j < n; ++j)
            val_[static_cast<std::size_t>(out + j)] =
                val_[static_cast<std::size_t>(a0 + j)] * val_[static_cast<std::size_t>(b0 + j)];
        nodes_.push_back(nd);
        return out;
    }

    int square(int a) {
        Node nd;
        nd.op = Op::Square;
        nd.out = alloc_block(1);
        nd.in0 = a;
        const double v = val_[static_cast<std::size_t>(a)];
        val_[static_cast<std::size_t>(nd.out)] = v * v;
        nodes_.push_back(nd);
        return nd.out;
    }

    int sqrt_of(int a) {
        const double v = val_[static_cast<std::size_t>(a)];
        if (v < 0.0) throw std::domain_error("tape sqrt: negative operand");
        Node nd;
        nd.op = Op::Sqrt;
        nd.out = alloc_block(1);
        nd.in0 = a;
        val_[static_cast<std::size_t>(nd.out)] = std::sqrt(v);
        nodes_.push_back(nd);
        return nd.out;
    }

    int pow_of(int a, double e) {
        const double v = val_[static_cast<std::size_t>(a)];
        if (v <= 0.0) throw std::domain_error("tape pow: non-positive base");
        Node nd;
        nd.op = Op::PowC;
        nd.c0 = e;
        nd.out = alloc_block(1);
        nd.in0 = a;
        val_[static_cast<std::size_t>(nd.out)] = std::pow(v, e);
        nodes_.push_back(nd);
        return nd.out;
    }

    int dot(int a0, int b0, int n) {
        Node nd;
        nd.op = Op::Dot;
        nd.out = alloc_block(1);
        nd.in0 = a0;
        nd.in1 = b0;
        nd.n = n;
        double s = 0.0;
        for (int k = 0; k < n; ++k)
            s += val_[static_cast<std::size_t>(a0 + k)] * val_[static_cast<std::size_t>(b0 + k)];
        val_[static_cast<std::size_t>(nd.out)] = s;
        nodes_.push_back(nd);
        return nd.out;
    }

    /// Affine layer: weights live in slots (row-major n_out x n_in at w0),
    /// optional bias block at b0. Gradients flow to inputs and to the layer
    /// parameters alike, which is what makes nested input-gradient terms
    /// differentiable with respect to the parameters.
    int dense(int in0, int n_in, int w0, int b0, int n_out) {
        Node nd;
        nd.op = Op::Dense;
        nd.out = alloc_block(n_out);
        nd.n_out = n_out;
        nd.in0 = in0;
        nd.in1 = w0;
        nd.in2 = b0;
        nd.n = n_in;
        for (int j = 0; j < n_out; ++j) {
            double s = b0 >= 0 ? val_[static_cast<std::size_t>(b0 + j)] : 0.0;
            const double* w = &val_[static_cast<std::size_t>(w0) + static_cast<std::size_t>(j) * n_in];
            const double* x = &val_[static_cast<std::size_t>(in0)];
            for (int k = 0; k < n_in; ++k) s += w[k] * x[k];
            val_[static_cast<std::size_t>(nd.out + j)] = s;
        }
        nodes_.push_back(nd);
        return nd.out;
    }

    int act_eval(Act a, double beta, int z0, int n) {
        Node nd;
        nd.op = Op::ActEval;
        nd.act = a;
        nd.c0 = beta;
        nd.out = alloc_block(n);
        nd.n_out = n;
        nd.in0 = z0;
        for (int j = 0; j < n; ++j)
            val_[static_cast<std::size_t>(nd.out + j)] =
                detail::act_eval(a, beta, val_[static_cast<std::size_t>(z0 + j)]);
        nodes_.push_back(nd);
        return nd.out;
    }

    int act_deriv(Act a, double beta, int z0, int n) {
        Node nd;
        nd.op = Op::ActDeriv;
        nd.act = a;
        nd.c0 = beta;
        nd.out = alloc_block(n);
        nd.n_out = n;
        nd.in0 = z0;
        for (int j = 0; j < n; ++j)
            val_[static_cast<std::size_t>(nd.out + j)] =
                detail::act_d1(a, beta, val_[static_cast<std::size_t>(z0 + j)]);
        nodes_.push_back(nd);
        return nd.out;
    }

    /// Sum of Euclidean distances over all row pairs of two slot blocks.
    /// Coincident rows contribute zero with zero subgradient.
    int pair_dist_sum(int a0, int rows_a, int b0, int rows_b, int d) {
        Node nd;
        nd.op = Op::PairDistVv;
        nd.out = alloc_block(1);
        nd.in0 = a0;
        nd.in1 = b0;
        nd.n = d;
        nd.rows = rows_a;
        nd.rows_b = rows_b;
        val_[static_cast<std::size_t>(nd.out)] =
            pair_dist_value(&val_[static_cast<std::size_t>(a0)], rows_a,
                            &val_[static_cast<std::size_t>(b0)], rows_b, d);
        nodes_.push_back(nd);
        return nd.out;
    }

    /// Variant with a constant second point set (captured by value).
    int pair_dist_sum_const(int a0, int rows_a, const double* b, int rows_b, int d) {
        Node nd;
        nd.op = Op::PairDistVc;
        nd.out = alloc_block(1);
        nd.in0 = a0;
        nd.n = d;
        nd.rows = rows_a;
        nd.rows_b = rows_b;
        nd.aux = static_cast<int>(cdata_.size());
        nd.n_aux = rows_b * d;
        cdata_.insert(cdata_.end(), b, b + static_cast<std::size_t>(rows_b) * d);
        val_[static_cast<std::size_t>(nd.out)] =
            pair_dist_value(&val_[static_cast<std::size_t>(a0)], rows_a,
                            &cdata_[static_cast<std::size_t>(nd.aux)], rows_b, d);
        nodes_.push_back(nd);
        return nd.out;
    }

    void backward(int loss_slot) {
        adj_.assign(val_.size(), 0.0);
        adj_[static_cast<std::size_t>(loss_slot)] = 1.0;
        for (std::size_t idx = nodes_.size(); idx-- > 0;) backward_node(nodes_[idx]);
    }

    /// Name of the op producing the first non-finite slot, or empty string.
    std::string first_non_finite() const {
        for (const Node& nd : nodes_)
            for (int j = 0; j < nd.n_out; ++j)
                if (!std::isfinite(val_[static_cast<std::size_t>(nd.out + j)])) return op_name(nd.op);
        return {};
    }

    void clear() {
        val_.clear();
        adj_.clear();
        nodes_.clear();
        args_.clear();
        coefs_.clear();
        cdata_.clear();
    }

private:
    static double pair_dist_value(const double* a, int rows_a, const double* b, int rows_b, int d) {
        double total = 0.0;
        for (int i = 0; i < rows_a; ++i) {
            const double* ai = a + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < rows_b; ++j) {
                const double* bj = b + static_cast<std::size_t>(j) * d;
                double s = 0.0;
                for (int k = 0; k < d; ++k) {
                    const double diff = ai[k] - bj[k];
                    s += diff * diff;
                }
                total += std::sqrt(s);
            }
        }
        return total;
    }

    void pair_dist_backward(const Node& nd, const double* b, bool b_on_tape) {
        const double g = adj_[static_cast<std::size_t>(nd.out)];
        if (g == 0.0) return;
        const double* a = &val_[static_cast<std::size_t>(nd.in0)];
        for (int i = 0; i < nd.rows; ++i) {
            const double* ai = a + static_cast<std::size_t>(i) * nd.n;
            for (int j = 0; j < nd.rows_b; ++j) {
                const double* bj = b + static_cast<std::size_t>(j) * nd.n;
                double s = 0.0;
                for (int k = 0; k < nd.n; ++k) {
                    const double diff = ai[k] - bj[k];
                    s += diff * diff;
                }
                if (s == 0.0) continue;
                const double inv = g / std::sqrt(s);
                for (int k = 0; k < nd.n; ++k) {
                    const double u = (ai[k] - bj[k]) * inv;
                    adj_[static_cast<std::size_t>(nd.in0 + i * nd.n + k)] += u;
                    if (b_on_tape) adj_[static_cast<std::size_t>(nd.in1 + j * nd.n + k)] -= u;
                }
            }
        }
    }

    void backward_node(const Node& nd) {
        switch (nd.op) {
            case Op::Affine: {
                const double g = adj_[static_cast<std::size_t>(nd.out)];
                if (g == 0.0) return;
                for (int k = 0; k < nd.n_aux; ++k)
                    adj_[static_cast<std::size_t>(args_[static_cast<std::size_t>(nd.aux + k)])] +=
                        g * coefs_[static_cast<std::size_t>(nd.aux + k)];
                return;
            }
            case Op::AddScaled: {
                for (int j = 0; j < nd.n_out; ++j) {
                    const double g = adj_[static_cast<std::size_t>(nd.out + j)];
                    adj_[static_cast<std::size_t>(nd.in0 + j)] += g;
                    adj_[static_cast<std::size_t>(nd.in1 + j)] += nd.c0 * g;
                }
                return;
            }
            case Op::Mul: {
                const double g = adj_[static_cast<std::size_t>(nd.out)];
                adj_[static_cast<std::size_t>(nd.in0)] += g * val_[static_cast<std::size_t>(nd.in1)];
                adj_[static_cast<std::size_t>(nd.in1)] += g * val_[static_cast<std::size_t>(nd.in0)];
                return;
            }
            case Op::MulEw: {
                for (int j = 0; j < nd.n_out; ++j) {
                    const double g = adj_[static_cast<std::size_t>(nd.out + j)];
                    adj_[static_cast<std::size_t>(nd.in0 + j)] +=
                        g * val_[static_cast<std::size_t>(nd.in1 + j)];
                    adj_[static_cast<std::size_t>(nd.in1 + j)] +=
                        g * val_[static_cast<std::size_t>(nd.in0 + j)];
                }
                return;
            }
            case Op::Square: {
                adj_[static_cast<std::size_t>(nd.in0)] +=
                    adj_[static_cast<std::size_t>(nd.out)] * 2.0 *
                    val_[static_cast<std::size_t>(nd.in0)];
                return;
            }
            case Op::Sqrt: {
                const double r = val_[static_cast<std::size_t>(nd.out)];
                if (r > 0.0)
                    adj_[static_cast<std::size_t>(nd.in0)] +=
                        adj_[static_cast<std::size_t>(nd.out)] * 0.5 / r;
                return;
            }
            case Op::PowC: {
                const double v = val_[static_cast<std::size_t>(nd.in0)];
                adj_[static_cast<std::size_t>(nd.in0)] +=
                    adj_[static_cast<std::size_t>(nd.out)] * nd.c0 * std::pow(v, nd.c0 - 1.0);
                return;
            }
            case Op::Dot: {
                const double g = adj_[static_cast<std::size_t>(nd.out)];
                if (g == 0.0) return;
                for (int k = 0; k < nd.n; ++k) {
                    adj_[static_cast<std::size_t>(nd.in0 + k)] +=
                        g * val_[static_cast<std::size_t>(nd.in1 + k)];
                    adj_[static_cast<std::size_t>(nd.in1 + k)] +=
                        g * val_[static_cast<std::size_t>(nd.in0 + k)];
                }
                return;
            }
            case Op::Dense: {
                for (int j = 0; j < nd.n_out; ++j) {
                    const double g = adj_[static_cast<std::size_t>(nd.out + j)];
                    if (g == 0.0) continue;
                    if (nd.in2 >= 0) adj_[static_cast<std::size_t>(nd.in2 + j)] += g;
                    const std::size_t wrow =
                        static_cast<std::size_t>(nd.in1) + static_cast<std::size_t>(j) * nd.n;
                    for (int k = 0; k < nd.n; ++k) {
                        adj_[static_cast<std::size_t>(nd.in0 + k)] += g * val_[wrow + k];
                        adj_[wrow + k] += g * val_[static_cast<std::size_t>(nd.in0 + k)];
                    }
                }
                return;
            }
            case Op::ActEval: {
                for (int j = 0; j < nd.n_out; ++j)
                    adj_[static_cast<std::size_t>(nd.in0 + j)] +=
                        adj_[static_cast<std::size_t>(nd.out + j)] *
                        detail::act_d1(nd.act, nd.c0, val_[static_cast<std::size_t>(nd.in0 + j)]);
                return;
            }
            case Op::ActDeriv: {
                for (int j = 0; j < nd.n_out; ++j)
                    adj_[static_cast<std::size_t>(nd.in0 + j)] +=
                        adj_[static_cast<std::size_t>(nd.out + j)] *
                        detail::act_d2(nd.act, nd.c0, val_[static_cast<std::size_t>(nd.in0 + j)]);
                return;
            }
            case Op::PairDistVv:
                pair_dist_backward(nd, &val_[static_cast<std::size_t>(nd.in1)], true);
                return;
            case Op::PairDistVc:
                pair_dist_backward(nd, &cdata_[static_cast<std::size_t>(nd.aux)], false);
                return;
        }
    }

    static const char* op_name(Op op) {
        switch (op) {
            case Op::Affine: return "affine";
            case Op::AddScaled: return "add_scaled";
            case Op::Mul: return "mul";
            case Op::MulEw: return "mul_ew";
            case Op::Square: return "square";
            case Op::Sqrt: return "sqrt";
            case Op::PowC: return "pow";
            case Op::Dot: return "dot";
            case Op::Dense: return "dense";
            case Op::ActEval: return "act_eval";
            case Op::ActDeriv: return "act_deriv";
            case Op::PairDistVv: return "pair_dist_sum";
            case Op::PairDistVc: return "pair_dist_sum_const";
        }
        return "?";
    }

    std::vector<double> val_;
    std::vector<double> adj_;
    std::vector<Node> nodes_;
    std::vector<int> args_;
    std::vector<double> coefs_;
    std::vector<double> cdata_;
};

}  // namespace ncf
