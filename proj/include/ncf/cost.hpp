#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ncf/autodiff.hpp"

namespace ncf {

/// Convex transport cost ell together with its Legendre transform h and the
/// gradient of h, which is all the characteristic-flow formulas consume.
/// Quadratic keeps the closed forms h(q) = |q|^2/2, grad h = q; the p-norm
/// family uses the dual exponent p* = p/(p-1).
class CostModel {
public:
    enum class Kind { Quadratic, PNorm };

    static CostModel quadratic() { return CostModel(Kind::Quadratic, 2.0); }

    static CostModel p_norm(double p) {
        if (!(p > 1.0)) throw std::invalid_argument("CostModel: p-norm requires p > 1");
        return CostModel(Kind::PNorm, p);
    }

    Kind kind() const { return kind_; }
    double p() const { return p_; }
    double p_dual() const { return p_ / (p_ - 1.0); }

    double ell(const std::vector<double>& z) const {
        const double r = norm(z);
        if (kind_ == Kind::Quadratic) return 0.5 * r * r;
        return std::pow(r, p_) / p_;
    }

    double h(const std::vector<double>& q) const {
        const double r = norm(q);
        if (kind_ == Kind::Quadratic) return 0.5 * r * r;
        const double ps = p_dual();
        return std::pow(r, ps) / ps;
    }

    std::vector<double> grad_h(const std::vector<double>& q) const {
        if (kind_ == Kind::Quadratic) return q;
        const double r = norm(q);
        std::vector<double> g(q.size(), 0.0);
        if (r == 0.0) return g;  // subgradient choice at the origin
        const double c = std::pow(r, p_dual() - 2.0);
        for (std::size_t i = 0; i < q.size(); ++i) g[i] = c * q[i];
        return g;
    }

    struct TapeHamiltonian {
        int h;         // h(q)
        int grad0;     // first slot of grad h(q), d consecutive slots
        int q_dot_gh;  // q . grad h(q)
    };

    /// Emits h, grad h and q.grad h for a gradient block already on the tape.
    TapeHamiltonian emit(Tape& tape, int q0, int d) const {
        TapeHamiltonian out{};
        if (kind_ == Kind::Quadratic) {
            const int s = tape.dot(q0, q0, d);
            out.h = tape.scale(0.5, s);
            out.grad0 = q0;
            out.q_dot_gh = s;
            return out;
        }
        const double ps = p_dual();
        const int s = tape.dot(q0, q0, d);
        const int r = tape.sqrt_of(s);
        out.h = tape.scale(1.0 / ps, tape.pow_of(r, ps));
        const int c = tape.pow_of(r, ps - 2.0);
        out.grad0 = tape.alloc_block(d);
        for (int k = 0; k < d; ++k) tape.mul_ew_into(out.grad0 + k, c, q0 + k, 1);
        out.q_dot_gh = tape.dot(q0, out.grad0, d);
        return out;
    }

private:
    CostModel(Kind k, double p) : kind_(k), p_(p) {}

    static double norm(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    }

    Kind kind_;
    double p_;
};

}  // namespace ncf
