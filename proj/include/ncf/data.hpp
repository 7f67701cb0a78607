#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncf/rng.hpp"

namespace ncf {

/// Affine frame transform: frame coordinates are (raw - shift) / scale.
struct Normalization {
    std::vector<double> shift;
    std::vector<double> scale;

    static Normalization identity(int d) {
        Normalization n;
        n.shift.assign(static_cast<std::size_t>(d), 0.0);
        n.scale.assign(static_cast<std::size_t>(d), 1.0);
        return n;
    }

    bool is_identity() const {
        for (double v : shift)
            if (v != 0.0) return false;
        for (double v : scale)
            if (v != 1.0) return false;
        return true;
    }
};

struct SampleSet {
    int dim = 0;
    std::vector<double> points;  // n x dim, row-major
    std::vector<int> labels;     // empty or one per row
    Normalization norm;          // raw -> current frame; identity when raw

    std::size_t size() const {
        return dim > 0 ? points.size() / static_cast<std::size_t>(dim) : 0;
    }
    double* row(std::size_t i) { return points.data() + i * static_cast<std::size_t>(dim); }
    const double* row(std::size_t i) const {
        return points.data() + i * static_cast<std::size_t>(dim);
    }
};

enum class NormalizeMode { Box, Standardize };

/// Rescales a raw set into the training frame: Box maps the bounding box onto
/// [-1,1]^d, Standardize centers to zero mean and unit variance. Degenerate
/// dimensions keep scale 1 (with a warning) so the transform stays invertible.
inline SampleSet normalize(const SampleSet& in, NormalizeMode mode = NormalizeMode::Box) {
    const std::size_t n = in.size();
    if (n == 0) throw std::invalid_argument("normalize: empty sample set");
    SampleSet out = in;
    out.norm.shift.assign(static_cast<std::size_t>(in.dim), 0.0);
    out.norm.scale.assign(static_cast<std::size_t>(in.dim), 1.0);

    for (int k = 0; k < in.dim; ++k) {
        double sh = 0.0, sc = 1.0;
        if (mode == NormalizeMode::Box) {
            double lo = in.points[static_cast<std::size_t>(k)], hi = lo;
            for (std::size_t i = 0; i < n; ++i) {
                const double v = in.row(i)[k];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            sh = 0.5 * (lo + hi);
            sc = 0.5 * (hi - lo);
        } else {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += in.row(i)[k];
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dv = in.row(i)[k] - mean;
                var += dv * dv;
            }
            sh = mean;
            sc = std::sqrt(var / static_cast<double>(n));
        }
        if (sc < 1e-300) {
            std::cerr << "normalize: dimension " << k << " has zero range, keeping scale 1\n";
            sc = 1.0;
        }
        out.norm.shift[static_cast<std::size_t>(k)] = sh;
        out.norm.scale[static_cast<std::size_t>(k)] = sc;
        for (std::size_t i = 0; i < n; ++i) out.row(i)[k] = (in.row(i)[k] - sh) / sc;
    }
    return out;
}

inline SampleSet denormalize(const SampleSet& in) {
    SampleSet out = in;
    for (std::size_t i = 0; i < in.size(); ++i)
        for (int k = 0; k < in.dim; ++k)
            out.row(i)[k] = in.row(i)[k] * in.norm.scale[static_cast<std::size_t>(k)] +
                            in.norm.shift[static_cast<std::size_t>(k)];
    out.norm = Normalization::identity(in.dim);
    return out;
}

inline void to_frame(const Normalization& nm, const double* raw, double* frame, int d) {
    for (int k = 0; k < d; ++k)
        frame[k] = (raw[k] - nm.shift[static_cast<std::size_t>(k)]) / nm.scale[static_cast<std::size_t>(k)];
}

inline void from_frame(const Normalization& nm, const double* frame, double* raw, int d) {
    for (int k = 0; k < d; ++k)
        raw[k] = frame[k] * nm.scale[static_cast<std::size_t>(k)] + nm.shift[static_cast<std::size_t>(k)];
}

// ---- toy 2-D generators -----------------------------------------------------

/// Spiral with angle U[1.5pi, 4.5pi], radius angle/(4.5pi), plus N(0, 0.01^2).
inline SampleSet sample_swiss_roll(std::size_t n, Rng& rng) {
    SampleSet s;
    s.dim = 2;
    s.norm = Normalization::identity(2);
    s.points.resize(n * 2);
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n; ++i) {
        const double th = rng.uniform(1.5 * pi, 4.5 * pi);
        s.points[2 * i] = th * std::cos(th) / (4.5 * pi) + 0.01 * rng.normal();
        s.points[2 * i + 1] = th * std::sin(th) / (4.5 * pi) + 0.01 * rng.normal();
    }
    return s;
}

/// Two interleaved half circles of radius 1 offset by 0.5 vertically, noise
/// sigma 0.05, then shrunk isotropically into roughly [-1,1]^2.
inline SampleSet sample_double_moons(std::size_t n, Rng& rng) {
    SampleSet s;
    s.dim = 2;
    s.norm = Normalization::identity(2);
    s.points.resize(n * 2);
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = rng.uniform(0.0, pi);
        double x, y;
        if (rng.uniform01() < 0.5) {
            x = std::cos(phi);
            y = std::sin(phi);
        } else {
            x = 1.0 - std::cos(phi);
            y = 0.5 - std::sin(phi);
        }
        x += 0.05 * rng.normal();
        y += 0.05 * rng.normal();
        s.points[2 * i] = (x - 0.5) / 1.5;
        s.points[2 * i + 1] = (y - 0.25) / 1.5;
    }
    return s;
}

/// Uniform over the 8 cells of a 4x4 grid on [-1,1]^2 with even i+j.
inline SampleSet sample_checkerboard(std::size_t n, Rng& rng) {
    SampleSet s;
    s.dim = 2;
    s.norm = Normalization::identity(2);
    s.points.resize(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t c = rng.below(8);
        const int ci = static_cast<int>(c) / 2;              // grid column 0..3
        const int cj = 2 * (static_cast<int>(c) % 2) + ci % 2;  // even-sum row
        s.points[2 * i] = -1.0 + 0.5 * (ci + rng.uniform01());
        s.points[2 * i + 1] = -1.0 + 0.5 * (cj + rng.uniform01());
    }
    return s;
}

/// Equal mixture of 8 isotropic Gaussians (sigma 0.05) on a circle of radius 0.8.
inline SampleSet sample_eight_gaussians(std::size_t n, Rng& rng) {
    SampleSet s;
    s.dim = 2;
    s.norm = Normalization::identity(2);
    s.points.resize(n * 2);
    const double pi = 3.14159265358979323846;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t k = rng.below(8);
        const double a = 2.0 * pi * static_cast<double>(k) / 8.0;
        s.points[2 * i] = 0.8 * std::cos(a) + 0.05 * rng.normal();
        s.points[2 * i + 1] = 0.8 * std::sin(a) + 0.05 * rng.normal();
    }
    return s;
}

/// Labeled Gaussian mixture: one isotropic component per (center, label) entry,
/// components drawn uniformly.
struct MixtureSpec {
    std::vector<std::array<double, 2>> centers;
    std::vector<int> labels;  // one per center
    double sigma = 0.1;
};

inline SampleSet sample_labeled_mixture(const MixtureSpec& spec, std::size_t n, Rng& rng) {
    if (spec.centers.empty() || spec.centers.size() != spec.labels.size())
        throw std::invalid_argument("sample_labeled_mixture: bad spec");
    SampleSet s;
    s.dim = 2;
    s.norm = Normalization::identity(2);
    s.points.resize(n * 2);
    s.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = static_cast<std::size_t>(rng.below(spec.centers.size()));
        s.points[2 * i] = spec.centers[k][0] + spec.sigma * rng.normal();
        s.points[2 * i + 1] = spec.centers[k][1] + spec.sigma * rng.normal();
        s.labels[i] = spec.labels[k];
    }
    return s;
}

/// Four blobs on the corners of a square; class = column for the vertical
/// variant, class = row for the horizontal one. Transporting one into the
/// other class-consistently forces two of the blobs across the diagonal.
inline MixtureSpec vertical_gaussians_spec() {
    MixtureSpec m;
    m.centers = {{-0.5, -0.5}, {-0.5, 0.5}, {0.5, -0.5}, {0.5, 0.5}};
    m.labels = {0, 0, 1, 1};
    m.sigma = 0.1;
    return m;
}

inline MixtureSpec horizontal_gaussians_spec() {
    MixtureSpec m;
    m.centers = {{-0.5, -0.5}, {0.5, -0.5}, {-0.5, 0.5}, {0.5, 0.5}};
    m.labels = {0, 0, 1, 1};
    m.sigma = 0.1;
    return m;
}

inline SampleSet sample_named(const std::string& name, std::size_t n, Rng& rng) {
    if (name == "swiss_roll") return sample_swiss_roll(n, rng);
    if (name == "double_moons") return sample_double_moons(n, rng);
    if (name == "checkerboard") return sample_checkerboard(n, rng);
    if (name == "eight_gaussians") return sample_eight_gaussians(n, rng);
    if (name == "vertical_gaussians") return sample_labeled_mixture(vertical_gaussians_spec(), n, rng);
    if (name == "horizontal_gaussians")
        return sample_labeled_mixture(horizontal_gaussians_spec(), n, rng);
    throw std::invalid_argument("unknown dataset: " + name);
}

// ---- point-cloud CSV --------------------------------------------------------

inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void save_points_csv(const std::string& path, const SampleSet& s) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (int k = 0; k < s.dim; ++k) f << (k ? "," : "") << "x" << k;
    if (!s.labels.empty()) f << ",label";
    f << "\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (int k = 0; k < s.dim; ++k) f << (k ? "," : "") << format_full(s.row(i)[k]);
        if (!s.labels.empty()) f << "," << s.labels[i];
        f << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline SampleSet load_points_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string header;
    if (!std::getline(f, header)) throw std::runtime_error("empty csv: " + path);

    int d = 0;
    bool labeled = false;
    {
        std::stringstream hs(header);
        std::string col;
        while (std::getline(hs, col, ',')) {
            if (col == "label") {
                labeled = true;
            } else if (col == "x" + std::to_string(d)) {
                ++d;
            } else {
                throw std::runtime_error("unexpected csv column '" + col + "' in " + path);
            }
        }
    }
    if (d == 0) throw std::runtime_error("no coordinate columns in " + path);

    SampleSet s;
    s.dim = d;
    s.norm = Normalization::identity(d);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        for (int k = 0; k < d; ++k) {
            if (!std::getline(ls, cell, ',')) throw std::runtime_error("short csv row in " + path);
            s.points.push_back(std::strtod(cell.c_str(), nullptr));
        }
        if (labeled) {
            if (!std::getline(ls, cell, ',')) throw std::runtime_error("missing label in " + path);
            s.labels.push_back(std::stoi(cell));
        }
    }
    return s;
}

/// One frame shared by both marginals: pooled box center, single scalar scale
/// (the largest half-range). A common shift plus isotropic scale conjugates
/// gradient-of-convex maps cleanly, so the optimal map in this frame maps back
/// to the optimal raw map; per-axis scaling would not.
inline Normalization pooled_isotropic_norm(const std::vector<const SampleSet*>& sets) {
    if (sets.empty() || sets.front()->size() == 0)
        throw std::invalid_argument("pooled_isotropic_norm: no points");
    const int d = sets.front()->dim;
    std::vector<double> lo(static_cast<std::size_t>(d), 1e300), hi(static_cast<std::size_t>(d), -1e300);
    for (const SampleSet* s : sets) {
        if (s->dim != d) throw std::invalid_argument("pooled_isotropic_norm: mixed dimensions");
        for (std::size_t i = 0; i < s->size(); ++i)
            for (int k = 0; k < d; ++k) {
                lo[static_cast<std::size_t>(k)] = std::min(lo[static_cast<std::size_t>(k)], s->row(i)[k]);
                hi[static_cast<std::size_t>(k)] = std::max(hi[static_cast<std::size_t>(k)], s->row(i)[k]);
            }
    }
    Normalization nm;
    nm.shift.resize(static_cast<std::size_t>(d));
    double half = 0.0;
    for (int k = 0; k < d; ++k) {
        nm.shift[static_cast<std::size_t>(k)] =
            0.5 * (lo[static_cast<std::size_t>(k)] + hi[static_cast<std::size_t>(k)]);
        half = std::max(half, 0.5 * (hi[static_cast<std::size_t>(k)] - lo[static_cast<std::size_t>(k)]));
    }
    if (half < 1e-300) half = 1.0;
    nm.scale.assign(static_cast<std::size_t>(d), half);
    return nm;
}

/// Rewrites a raw set into the given frame (composition with an existing
/// non-identity frame is not supported).
inline SampleSet apply_frame(const SampleSet& raw, const Normalization& nm) {
    if (!raw.norm.is_identity())
        throw std::invalid_argument("apply_frame: set is already framed");
    SampleSet out = raw;
    for (std::size_t i = 0; i < out.size(); ++i) to_frame(nm, raw.row(i), out.row(i), out.dim);
    out.norm = nm;
    return out;
}

/// Axis-aligned bounding box of several sets, symmetric-margin expanded.
inline void bounding_box(const std::vector<const SampleSet*>& sets, double margin,
                         std::vector<double>& lo, std::vector<double>& hi) {
    if (sets.empty() || sets.front()->size() == 0)
        throw std::invalid_argument("bounding_box: no points");
    const int d = sets.front()->dim;
    lo.assign(static_cast<std::size_t>(d), 1e300);
    hi.assign(static_cast<std::size_t>(d), -1e300);
    for (const SampleSet* s : sets) {
        if (s->dim != d) throw std::invalid_argument("bounding_box: mixed dimensions");
        for (std::size_t i = 0; i < s->size(); ++i)
            for (int k = 0; k < d; ++k) {
                lo[static_cast<std::size_t>(k)] = std::min(lo[static_cast<std::size_t>(k)], s->row(i)[k]);
                hi[static_cast<std::size_t>(k)] = std::max(hi[static_cast<std::size_t>(k)], s->row(i)[k]);
            }
    }
    for (int k = 0; k < d; ++k) {
        const double pad = margin * (hi[static_cast<std::size_t>(k)] - lo[static_cast<std::size_t>(k)]);
        lo[static_cast<std::size_t>(k)] -= pad;
        hi[static_cast<std::size_t>(k)] += pad;
    }
}

}  // namespace ncf
