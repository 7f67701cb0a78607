#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncf/data.hpp"
#include "ncf/image.hpp"
#include "ncf/transport.hpp"

namespace ncf {

/// Normalized histogram of values clipped into [0,1].
struct ChannelHistogram {
    std::vector<double> h;

    explicit ChannelHistogram(int bins = 256) : h(static_cast<std::size_t>(bins), 0.0) {}
    int bins() const { return static_cast<int>(h.size()); }
};

inline ChannelHistogram channel_histogram(const std::vector<double>& values, int bins = 256) {
    if (values.empty()) throw std::invalid_argument("channel_histogram: no values");
    ChannelHistogram hist(bins);
    for (double v : values) {
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        int b = static_cast<int>(v * bins);
        if (b == bins) b = bins - 1;
        hist.h[static_cast<std::size_t>(b)] += 1.0;
    }
    for (double& x : hist.h) x /= static_cast<double>(values.size());
    return hist;
}

/// Mean absolute difference of the two cumulative distributions.
inline double emd_1d(const ChannelHistogram& a, const ChannelHistogram& b) {
    if (a.bins() != b.bins()) throw std::invalid_argument("emd_1d: bin count mismatch");
    double cdf_a = 0.0, cdf_b = 0.0, acc = 0.0;
    for (int i = 0; i < a.bins(); ++i) {
        cdf_a += a.h[static_cast<std::size_t>(i)];
        cdf_b += b.h[static_cast<std::size_t>(i)];
        acc += std::abs(cdf_a - cdf_b);
    }
    return acc / static_cast<double>(a.bins());
}

inline double hist_intersection(const ChannelHistogram& a, const ChannelHistogram& b) {
    if (a.bins() != b.bins()) throw std::invalid_argument("hist_intersection: bin count mismatch");
    double acc = 0.0;
    for (int i = 0; i < a.bins(); ++i)
        acc += std::min(a.h[static_cast<std::size_t>(i)], b.h[static_cast<std::size_t>(i)]);
    return acc;
}

namespace detail {

inline std::vector<double> channel_values(const Image& img, int c) {
    std::vector<double> v(static_cast<std::size_t>(img.width) * img.height);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = img.rgb[3 * i + static_cast<std::size_t>(c)];
    return v;
}

}  // namespace detail

inline double emd_images(const Image& a, const Image& b, int bins = 256) {
    double acc = 0.0;
    for (int c = 0; c < 3; ++c)
        acc += emd_1d(channel_histogram(detail::channel_values(a, c), bins),
                      channel_histogram(detail::channel_values(b, c), bins));
    return acc / 3.0;
}

inline double hist_intersection_images(const Image& a, const Image& b, int bins = 256) {
    double acc = 0.0;
    for (int c = 0; c < 3; ++c)
        acc += hist_intersection(channel_histogram(detail::channel_values(a, c), bins),
                                 channel_histogram(detail::channel_values(b, c), bins));
    return acc / 3.0;
}

namespace detail {

/// Type-7 empirical quantile (sorted input).
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * sorted[lo] + w * sorted[lo + 1];
}

}  // namespace detail

/// RMS deviation, in target standard deviations, between a candidate 1-D map
/// and the monotone rearrangement of the samples, probed at interior quantiles.
inline double monotone_map_rms(const std::vector<double>& mu_samples,
                               const std::vector<double>& nu_samples,
                               const std::function<double(double)>& mapped, int n_quantiles = 99) {
    if (mu_samples.size() < 2 || nu_samples.size() < 2)
        throw std::invalid_argument("monotone_map_rms: need at least two samples per side");
    std::vector<double> mu = mu_samples, nu = nu_samples;
    std::sort(mu.begin(), mu.end());
    std::sort(nu.begin(), nu.end());

    double mean = 0.0;
    for (double v : nu) mean += v;
    mean /= static_cast<double>(nu.size());
    double var = 0.0;
    for (double v : nu) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(nu.size()));
    if (sd == 0.0) throw std::invalid_argument("monotone_map_rms: degenerate target");

    double acc = 0.0;
    for (int k = 1; k <= n_quantiles; ++k) {
        const double q = static_cast<double>(k) / (n_quantiles + 1);
        const double x = detail::quantile_sorted(mu, q);
        const double y = detail::quantile_sorted(nu, q);
        const double diff = mapped(x) - y;
        acc += diff * diff;
    }
    return std::sqrt(acc / n_quantiles) / sd;
}

/// Mean distance between each point and its forward-then-backward image,
/// relative to the mean pairwise spread of the set (subsampled at 2000 rows).
inline double round_trip_error(const Potential& u, const CostModel& cost, double tf,
                               const SampleSet& frame_points) {
    const std::size_t n = frame_points.size();
    if (n == 0) throw std::invalid_argument("round_trip_error: empty set");
    const int d = frame_points.dim;
    const std::vector<double> fwd =
        transport_points(u, cost, MapDirection::Forward, tf, frame_points.points);
    const std::vector<double> back = transport_points(u, cost, MapDirection::Backward, tf, fwd);

    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) {
            const double diff = back[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] -
                                frame_points.row(i)[k];
            s += diff * diff;
        }
        err += std::sqrt(s);
    }
    err /= static_cast<double>(n);

    const std::size_t m = std::min<std::size_t>(n, 2000);
    double scale = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                const double diff = frame_points.row(i)[k] - frame_points.row(j)[k];
                s += diff * diff;
            }
            scale += std::sqrt(s);
            ++pairs;
        }
    if (pairs == 0 || scale == 0.0) throw std::invalid_argument("round_trip_error: degenerate set");
    return err / (scale / static_cast<double>(pairs));
}

// ---- reporting -----------------------------------------------------------------

struct MetricRow {
    std::string metric;
    std::string direction;
    double value = 0.0;
};

inline void save_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "metric,direction,value\n";
    for (const auto& r : rows) f << r.metric << "," << r.direction << "," << format_full(r.value) << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

/// Minimal scatter/segment plot for 2-D clouds.
struct SvgLayer {
    const SampleSet* points = nullptr;
    std::string color = "#4682b4";
    double radius = 1.5;
};

struct SvgSegments {
    std::vector<double> from;  // n x 2
    std::vector<double> to;    // n x 2
    std::string color = "#999999";
};

inline void save_svg_scatter(const std::string& path, const std::vector<SvgLayer>& layers,
                             const SvgSegments* segments = nullptr, int size_px = 640) {
    double lo = 1e300, hi = -1e300;
    for (const auto& l : layers)
        for (double v : l.points->points) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo)) {
        lo = -1.0;
        hi = 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const double s = size_px / (hi - lo);
    auto px = [&](double x) { return (x - lo) * s; };
    auto py = [&](double y) { return (hi - y) * s; };
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_px << "\" height=\""
      << size_px << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (segments) {
        const std::size_t n = segments->from.size() / 2;
        for (std::size_t i = 0; i < n; ++i)
            f << "<line x1=\"" << fmt(px(segments->from[2 * i])) << "\" y1=\""
              << fmt(py(segments->from[2 * i + 1])) << "\" x2=\"" << fmt(px(segments->to[2 * i]))
              << "\" y2=\"" << fmt(py(segments->to[2 * i + 1])) << "\" stroke=\"" << segments->color
              << "\" stroke-width=\"0.5\" opacity=\"0.35\"/>\n";
    }
    for (const auto& l : layers)
        for (std::size_t i = 0; i < l.points->size(); ++i)
            f << "<circle cx=\"" << fmt(px(l.points->row(i)[0])) << "\" cy=\""
              << fmt(py(l.points->row(i)[1])) << "\" r=\"" << l.radius << "\" fill=\"" << l.color
              << "\" opacity=\"0.6\"/>\n";
    f << "</svg>\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace ncf
