#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncf/rng.hpp"

namespace ncf {

/// Dense row-major matrix, sized for the small systems handled here (d <= 64).
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline Mat matmul(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) throw std::invalid_argument("matmul: inner dimensions differ");
    Mat z(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            const double v = x(i, k);
            if (v == 0.0) continue;
            for (int j = 0; j < y.cols; ++j) z(i, j) += v * y(k, j);
        }
    return z;
}

inline std::vector<double> matvec(const Mat& m, const std::vector<double>& v) {
    if (m.cols != static_cast<int>(v.size())) throw std::invalid_argument("matvec: size mismatch");
    std::vector<double> out(static_cast<std::size_t>(m.rows), 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

inline Mat transpose(const Mat& m) {
    Mat t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

inline double frobenius(const Mat& m) {
    double s = 0.0;
    for (double v : m.a) s += v * v;
    return std::sqrt(s);
}

inline double max_asymmetry(const Mat& m) {
    double w = 0.0;
    for (int i = 0; i < m.rows; ++i)
        for (int j = i + 1; j < m.cols; ++j) w = std::max(w, std::abs(m(i, j) - m(j, i)));
    return w;
}

inline void symmetrize(Mat& m) {
    for (int i = 0; i < m.rows; ++i)
        for (int j = i + 1; j < m.cols; ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
}

struct EigenSym {
    std::vector<double> values;  // ascending
    Mat vectors;                 // columns are eigenvectors
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Sweeps until the
/// off-diagonal Frobenius norm drops below 1e-12 (at most 100 sweeps).
inline EigenSym jacobi_eigen_sym(const Mat& input) {
    if (input.rows != input.cols) throw std::invalid_argument("jacobi_eigen_sym: matrix not square");
    if (max_asymmetry(input) > 1e-9 * (1.0 + frobenius(input)))
        throw std::invalid_argument("jacobi_eigen_sym: matrix not symmetric");

    const int n = input.rows;
    Mat a = input;
    symmetrize(a);
    Mat q = Mat::identity(n);

    auto off_norm = [&]() {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < 100 && off_norm() >= 1e-12; ++sweep) {
        for (int p = 0; p < n - 1; ++p)
            for (int r = p + 1; r < n; ++r) {
                const double apr = a(p, r);
                if (apr == 0.0) continue;
                const double theta = (a(r, r) - a(p, p)) / (2.0 * apr);
                // stable tangent of the rotation angle
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akr = a(k, r);
                    a(k, p) = c * akp - s * akr;
                    a(k, r) = s * akp + c * akr;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), ark = a(r, k);
                    a(p, k) = c * apk - s * ark;
                    a(r, k) = s * apk + c * ark;
                }
                a(p, r) = 0.0;
                a(r, p) = 0.0;
                for (int k = 0; k < n; ++k) {
                    const double qkp = q(k, p), qkr = q(k, r);
                    q(k, p) = c * qkp - s * qkr;
                    q(k, r) = s * qkp + c * qkr;
                }
            }
    }

    EigenSym e;
    e.values.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) e.values[static_cast<std::size_t>(i)] = a(i, i);

    // sort ascending, permuting eigenvector columns alongside
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (e.values[static_cast<std::size_t>(order[j])] < e.values[static_cast<std::size_t>(order[i])])
                std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);

    EigenSym sorted;
    sorted.values.resize(static_cast<std::size_t>(n));
    sorted.vectors = Mat(n, n);
    for (int j = 0; j < n; ++j) {
        const int src = order[static_cast<std::size_t>(j)];
        sorted.values[static_cast<std::size_t>(j)] = e.values[static_cast<std::size_t>(src)];
        for (int i = 0; i < n; ++i) sorted.vectors(i, j) = q(i, src);
    }
    return sorted;
}

/// Applies a scalar function to the spectrum: Q f(Lambda) Q^T.
template <typename F>
inline Mat spectral_apply(const EigenSym& e, F&& f) {
    const int n = e.vectors.rows;
    Mat out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k)
                s += e.vectors(i, k) * f(e.values[static_cast<std::size_t>(k)]) * e.vectors(j, k);
            out(i, j) = s;
        }
    symmetrize(out);
    return out;
}

/// Orthogonal factor of a standard-normal matrix via Gram-Schmidt, with the
/// sign convention that the R diagonal is positive (Haar-distributed Q).
inline Mat random_orthogonal(int n, Rng& rng) {
    Mat g(n, n);
    for (double& v : g.a) v = rng.normal();
    // modified Gram-Schmidt over columns
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < j; ++k) {
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += g(i, k) * g(i, j);
            for (int i = 0; i < n; ++i) g(i, j) -= dot * g(i, k);
        }
        double nrm = 0.0;
        for (int i = 0; i < n; ++i) nrm += g(i, j) * g(i, j);
        nrm = std::sqrt(nrm);
        if (nrm < 1e-12) throw std::runtime_error("random_orthogonal: degenerate draw");
        for (int i = 0; i < n; ++i) g(i, j) /= nrm;
    }
    return g;
}

}  // namespace ncf
