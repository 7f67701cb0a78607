#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncf/data.hpp"
#include "ncf/linalg.hpp"
#include "ncf/model.hpp"
#include "ncf/rng.hpp"

namespace ncf {

/// Symmetric positive-definite square root through the Jacobi spectrum.
inline Mat spd_sqrt(const Mat& s) {
    const EigenSym e = jacobi_eigen_sym(s);
    for (double v : e.values)
        if (v <= 0.0) throw std::invalid_argument("spd_sqrt: matrix not positive definite");
    return spectral_apply(e, [](double v) { return std::sqrt(v); });
}

/// Gaussian source/target pair with the derived transport quantities cached:
/// the Monge matrix A = S^-1 (S Sigma_nu S)^1/2 S^-1 for S = Sigma_mu^1/2,
/// its spectrum, and the factor square roots used for sampling.
struct GaussianPair {
    int dim = 0;
    std::vector<double> b_mu, b_nu;
    Mat sigma_mu, sigma_nu;

    Mat monge;        // A
    Mat basis;        // eigenvectors of A
    std::vector<double> a_eig;
    Mat sqrt_mu, sqrt_nu;
};

inline GaussianPair make_gaussian_pair(std::vector<double> b_mu, std::vector<double> b_nu,
                                       Mat sigma_mu, Mat sigma_nu) {
    const int d = sigma_mu.rows;
    if (sigma_mu.cols != d || sigma_nu.rows != d || sigma_nu.cols != d ||
        static_cast<int>(b_mu.size()) != d || static_cast<int>(b_nu.size()) != d)
        throw std::invalid_argument("make_gaussian_pair: inconsistent dimensions");

    GaussianPair gp;
    gp.dim = d;
    gp.b_mu = std::move(b_mu);
    gp.b_nu = std::move(b_nu);
    gp.sigma_mu = std::move(sigma_mu);
    gp.sigma_nu = std::move(sigma_nu);

    const EigenSym em = jacobi_eigen_sym(gp.sigma_mu);
    for (double v : em.values)
        if (v <= 0.0) throw std::invalid_argument("make_gaussian_pair: source covariance not SPD");
    gp.sqrt_mu = spectral_apply(em, [](double v) { return std::sqrt(v); });
    const Mat inv_sqrt_mu = spectral_apply(em, [](double v) { return 1.0 / std::sqrt(v); });
    gp.sqrt_nu = spd_sqrt(gp.sigma_nu);

    Mat mid = matmul(matmul(gp.sqrt_mu, gp.sigma_nu), gp.sqrt_mu);
    symmetrize(mid);
    const Mat mid_sqrt = spd_sqrt(mid);
    gp.monge = matmul(matmul(inv_sqrt_mu, mid_sqrt), inv_sqrt_mu);
    symmetrize(gp.monge);

    const EigenSym ea = jacobi_eigen_sym(gp.monge);
    gp.basis = ea.vectors;
    gp.a_eig = ea.values;
    return gp;
}

/// Closed-form optimal map A(x - b_mu) + b_nu.
inline std::vector<double> optimal_map(const GaussianPair& gp, const double* x) {
    std::vector<double> out(static_cast<std::size_t>(gp.dim));
    for (int i = 0; i < gp.dim; ++i) {
        double s = gp.b_nu[static_cast<std::size_t>(i)];
        for (int j = 0; j < gp.dim; ++j)
            s += gp.monge(i, j) * (x[j] - gp.b_mu[static_cast<std::size_t>(j)]);
        out[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

/// Eulerian interpolation velocity ((1-t)I + tA)^-1 ((A-I)x + b_nu - A b_mu).
inline std::vector<double> optimal_velocity(const GaussianPair& gp, const double* x, double t) {
    const int d = gp.dim;
    std::vector<double> rhs(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        double s = gp.b_nu[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) {
            s += (gp.monge(i, j) - (i == j ? 1.0 : 0.0)) * x[j];
            s -= gp.monge(i, j) * gp.b_mu[static_cast<std::size_t>(j)];
        }
        rhs[static_cast<std::size_t>(i)] = s;
    }
    // solve through the spectrum of A; (1-t)I + tA shares its eigenvectors
    std::vector<double> c(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += gp.basis(j, i) * rhs[static_cast<std::size_t>(j)];
        const double b = 1.0 + t * (gp.a_eig[static_cast<std::size_t>(i)] - 1.0);
        if (std::abs(b) < 1e-14) throw std::runtime_error("optimal_velocity: singular interpolation");
        c[static_cast<std::size_t>(i)] = s / b;
    }
    std::vector<double> out(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += gp.basis(i, j) * c[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

/// Exact space-time potential whose gradient field reproduces the pair's
/// optimal transport: coefficients follow the closed-form time law.
inline QuadraticPotential optimal_potential(const GaussianPair& gp, double tf = 1.0) {
    QuadraticPotential q;
    q.dim = gp.dim;
    q.tf = tf;
    q.law = QuadraticPotential::Law::GaussianOptimal;
    q.basis = gp.basis;
    q.a_eig = gp.a_eig;
    q.b_mu = gp.b_mu;
    q.b_nu = gp.b_nu;
    return q;
}

/// Quadratic coefficients of the optimal potential at one time.
inline QuadraticPotential::Coeffs optimal_theta(const GaussianPair& gp, double t) {
    return optimal_potential(gp).coeffs(t);
}

/// Knot-sampled variant of the optimal potential (exact at the knots, linear
/// interpolation between them).
inline QuadraticPotential optimal_potential_knots(const GaussianPair& gp, int n_knots = 17,
                                                  double tf = 1.0) {
    if (n_knots < 2) throw std::invalid_argument("optimal_potential_knots: need at least 2 knots");
    const QuadraticPotential exact = optimal_potential(gp, tf);
    std::vector<double> ts(static_cast<std::size_t>(n_knots));
    std::vector<Mat> t2s;
    std::vector<std::vector<double>> t1s;
    std::vector<double> t0s;
    for (int k = 0; k < n_knots; ++k) {
        const double t = tf * static_cast<double>(k) / (n_knots - 1);
        ts[static_cast<std::size_t>(k)] = t;
        const auto c = exact.coeffs(t);
        t2s.push_back(c.t2);
        t1s.push_back(c.t1);
        t0s.push_back(c.t0);
    }
    return QuadraticPotential::from_knots(tf, std::move(ts), std::move(t2s), std::move(t1s),
                                          std::move(t0s));
}

/// Random SPD pair: covariances Q diag(exp(U[-2,2])) Q', Haar-orthogonal Q,
/// both means zero.
inline GaussianPair random_gaussian_pair(int d, std::uint64_t seed) {
    Rng rng(seed);
    auto draw_cov = [&]() {
        const Mat q = random_orthogonal(d, rng);
        std::vector<double> lam(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) lam[static_cast<std::size_t>(i)] = std::exp(rng.uniform(-2.0, 2.0));
        Mat cov(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int k = 0; k < d; ++k) s += q(i, k) * lam[static_cast<std::size_t>(k)] * q(j, k);
                cov(i, j) = s;
            }
        symmetrize(cov);
        return cov;
    };
    const Mat smu = draw_cov();
    const Mat snu = draw_cov();
    return make_gaussian_pair(std::vector<double>(static_cast<std::size_t>(d), 0.0),
                              std::vector<double>(static_cast<std::size_t>(d), 0.0), smu, snu);
}

enum class Marginal { Mu, Nu };

inline SampleSet sample_gaussian(const GaussianPair& gp, Marginal which, std::size_t n, Rng& rng) {
    const int d = gp.dim;
    const Mat& s = which == Marginal::Mu ? gp.sqrt_mu : gp.sqrt_nu;
    const std::vector<double>& b = which == Marginal::Mu ? gp.b_mu : gp.b_nu;
    SampleSet out;
    out.dim = d;
    out.norm = Normalization::identity(d);
    out.points.resize(n * static_cast<std::size_t>(d));
    std::vector<double> z(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) z[static_cast<std::size_t>(k)] = rng.normal();
        for (int r = 0; r < d; ++r) {
            double acc = b[static_cast<std::size_t>(r)];
            for (int k = 0; k < d; ++k) acc += s(r, k) * z[static_cast<std::size_t>(k)];
            out.points[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(r)] = acc;
        }
    }
    return out;
}

/// Unexplained variance percentage of a candidate forward map against the
/// closed form: 100 * E_mu |T(x) - T*(x)|^2 / trace(Sigma_nu).
inline double uvp(const std::function<void(const double*, double*)>& predicted,
                  const GaussianPair& gp, std::size_t n_samples, std::uint64_t seed) {
    Rng rng(seed);
    const SampleSet xs = sample_gaussian(gp, Marginal::Mu, n_samples, rng);
    double acc = 0.0;
    std::vector<double> yhat(static_cast<std::size_t>(gp.dim));
    for (std::size_t i = 0; i < n_samples; ++i) {
        predicted(xs.row(i), yhat.data());
        const std::vector<double> ystar = optimal_map(gp, xs.row(i));
        for (int k = 0; k < gp.dim; ++k) {
            const double diff = yhat[static_cast<std::size_t>(k)] - ystar[static_cast<std::size_t>(k)];
            acc += diff * diff;
        }
    }
    double tr = 0.0;
    for (int i = 0; i < gp.dim; ++i) tr += gp.sigma_nu(i, i);
    return 100.0 * acc / static_cast<double>(n_samples) / tr;
}

// ---- sidecar serialization ---------------------------------------------------

inline void save_gaussian_pair(const std::string& path, const GaussianPair& gp) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    auto join = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_full(v[i]);
        return s;
    };
    f << "d=" << gp.dim << "\n";
    f << "b_mu=" << join(gp.b_mu) << "\n";
    f << "b_nu=" << join(gp.b_nu) << "\n";
    f << "sigma_mu=" << join(gp.sigma_mu.a) << "\n";
    f << "sigma_nu=" << join(gp.sigma_nu.a) << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline GaussianPair load_gaussian_pair(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    int d = 0;
    std::vector<double> bmu, bnu, smu, snu;
    auto split = [](const std::string& s) {
        std::vector<double> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(std::strtod(cell.c_str(), nullptr));
        return out;
    };
    while (std::getline(f, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "d") d = std::stoi(val);
        else if (key == "b_mu") bmu = split(val);
        else if (key == "b_nu") bnu = split(val);
        else if (key == "sigma_mu") smu = split(val);
        else if (key == "sigma_nu") snu = split(val);
    }
    if (d == 0 || static_cast<int>(bmu.size()) != d || smu.size() != static_cast<std::size_t>(d) * d)
        throw std::runtime_error("malformed gaussian pair file: " + path);
    Mat m1(d, d), m2(d, d);
    m1.a = smu;
    m2.a = snu;
    return make_gaussian_pair(std::move(bmu), std::move(bnu), std::move(m1), std::move(m2));
}

}  // namespace ncf
