#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ncf/eval.hpp"
#include "ncf/gaussian.hpp"

namespace fs = std::filesystem;
using namespace ncf;

namespace {

fs::path temp_path(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "ncf_eval_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = hay.find(needle); pos != std::string::npos;
         pos = hay.find(needle, pos + needle.size()))
        ++n;
    return n;
}

Image solid_image(int w, int h, double r, double g, double b) {
    Image img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
        img.rgb[3 * i] = r;
        img.rgb[3 * i + 1] = g;
        img.rgb[3 * i + 2] = b;
    }
    return img;
}

}  // namespace

TEST(ChannelHistogramTest, BinsClampAndNormalize) {
    const auto h = channel_histogram({0.0, 0.25, 0.5, 0.999, 1.0}, 4);
    ASSERT_EQ(h.bins(), 4);
    EXPECT_DOUBLE_EQ(h.h[0], 0.2);
    EXPECT_DOUBLE_EQ(h.h[1], 0.2);
    EXPECT_DOUBLE_EQ(h.h[2], 0.2);
    EXPECT_DOUBLE_EQ(h.h[3], 0.4);  // 0.999 and the top edge share the last bin

    const auto c = channel_histogram({-0.5, 2.0}, 4);
    EXPECT_DOUBLE_EQ(c.h[0], 0.5);
    EXPECT_DOUBLE_EQ(c.h[3], 0.5);

    double total = 0.0;
    for (double v : channel_histogram({0.1, 0.2, 0.7, 0.7, 0.9}, 256).h) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);

    EXPECT_THROW(channel_histogram({}, 4), std::invalid_argument);
}

TEST(Emd1d, FrozenValuesAndProperties) {
    ChannelHistogram a(2), b(2);
    a.h = {1.0, 0.0};
    b.h = {0.0, 1.0};
    EXPECT_DOUBLE_EQ(emd_1d(a, b), 0.5);
    EXPECT_DOUBLE_EQ(emd_1d(b, a), 0.5);
    EXPECT_DOUBLE_EQ(emd_1d(a, a), 0.0);

    ChannelHistogram c(4), d(4);
    c.h = {1.0, 0.0, 0.0, 0.0};
    d.h = {0.0, 0.0, 0.0, 1.0};
    EXPECT_DOUBLE_EQ(emd_1d(c, d), 0.75);

    ChannelHistogram e(4), mid(4);
    e.h = {1.0, 0.0, 0.0, 0.0};
    mid.h = {0.0, 1.0, 0.0, 0.0};
    EXPECT_LT(emd_1d(e, mid), emd_1d(c, d)) << "mass moved further must cost more";

    EXPECT_THROW(emd_1d(a, c), std::invalid_argument);
}

TEST(HistIntersection, FrozenValues) {
    ChannelHistogram a(2), b(2), half(2);
    a.h = {1.0, 0.0};
    b.h = {0.0, 1.0};
    half.h = {0.5, 0.5};
    EXPECT_DOUBLE_EQ(hist_intersection(half, a), 0.5);
    EXPECT_DOUBLE_EQ(hist_intersection(a, a), 1.0);
    EXPECT_DOUBLE_EQ(hist_intersection(a, b), 0.0);
    ChannelHistogram c(4);
    EXPECT_THROW(hist_intersection(a, c), std::invalid_argument);
}

TEST(ImageMetrics, ChannelAverages) {
    const auto black = solid_image(2, 2, 0.0, 0.0, 0.0);
    const auto white = solid_image(2, 2, 1.0, 1.0, 1.0);
    const auto mixed = solid_image(2, 2, 0.0, 1.0, 0.5);

    EXPECT_DOUBLE_EQ(emd_images(black, black), 0.0);
    EXPECT_NEAR(emd_images(black, white), 255.0 / 256.0, 1e-12);
    EXPECT_NEAR(emd_images(black, mixed), (0.0 + 255.0 / 256.0 + 0.5) / 3.0, 1e-12);

    EXPECT_DOUBLE_EQ(hist_intersection_images(black, black), 1.0);
    EXPECT_DOUBLE_EQ(hist_intersection_images(black, white), 0.0);
    EXPECT_NEAR(hist_intersection_images(black, mixed), 1.0 / 3.0, 1e-12);
}

TEST(QuantileSorted, Type7Interpolation) {
    const std::vector<double> s = {1.0, 2.0, 3.0, 4.0};
    EXPECT_DOUBLE_EQ(detail::quantile_sorted(s, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(detail::quantile_sorted(s, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(detail::quantile_sorted(s, 0.5), 2.5);
    EXPECT_NEAR(detail::quantile_sorted(s, 1.0 / 3.0), 2.0, 1e-12);
}

TEST(MonotoneMapRms, ExactAffineMapOnMatchedQuantiles) {
    // nu holds exactly the mapped mu values, so the rearrangement is 2x and
    // the candidate map hits every probed quantile.
    const std::vector<double> mu = {0.0, 1.0};
    const std::vector<double> nu = {0.0, 2.0};
    EXPECT_DOUBLE_EQ(monotone_map_rms(mu, nu, [](double x) { return 2.0 * x; }, 3), 0.0);
    EXPECT_NEAR(monotone_map_rms(mu, nu, [](double x) { return x; }, 3), std::sqrt(0.875 / 3.0),
                1e-12);
}

TEST(MonotoneMapRms, RecoversGaussianAffineMap) {
    Rng rng(2024);
    const std::size_t n = 100000;
    std::vector<double> mu(n), nu(n);
    for (std::size_t i = 0; i < n; ++i) mu[i] = rng.normal();
    for (std::size_t i = 0; i < n; ++i) nu[i] = 2.0 * rng.normal() + 3.0;
    const double good = monotone_map_rms(mu, nu, [](double x) { return 2.0 * x + 3.0; });
    EXPECT_LT(good, 0.02);
    const double ident = monotone_map_rms(mu, nu, [](double x) { return x; });
    EXPECT_GT(ident, 1.0);
}

TEST(MonotoneMapRms, InvalidInputsThrow) {
    const auto id = [](double x) { return x; };
    EXPECT_THROW(monotone_map_rms({1.0}, {1.0, 2.0}, id), std::invalid_argument);
    EXPECT_THROW(monotone_map_rms({1.0, 2.0}, {3.0}, id), std::invalid_argument);
    EXPECT_THROW(monotone_map_rms({1.0, 2.0}, {3.0, 3.0}, id), std::invalid_argument);
}

TEST(RoundTripError, ZeroPotentialIsIdentity) {
    const Mat Z(2, 2);
    const auto q = QuadraticPotential::from_knots(1.0, {0.0, 1.0}, {Z, Z},
                                                  {{0.0, 0.0}, {0.0, 0.0}}, {0.0, 0.0});
    SampleSet pts;
    pts.dim = 2;
    Rng rng(5);
    pts.points.resize(2 * 50);
    for (double& v : pts.points) v = rng.normal();
    EXPECT_EQ(round_trip_error(Potential{q}, CostModel::quadratic(), 1.0, pts), 0.0);
}

TEST(RoundTripError, OptimalPotentialInvertsExactly) {
    const auto gp = random_gaussian_pair(2, 31);
    const Potential u = optimal_potential(gp, 1.0);
    Rng rng(7);
    const SampleSet pts = sample_gaussian(gp, Marginal::Mu, 400, rng);
    EXPECT_LT(round_trip_error(u, CostModel::quadratic(), 1.0, pts), 1e-8);
}

TEST(RoundTripError, InvalidSetsThrow) {
    const Mat Z(1, 1);
    const auto q = QuadraticPotential::from_knots(1.0, {0.0, 1.0}, {Z, Z}, {{0.0}, {0.0}},
                                                  {0.0, 0.0});
    const Potential u{q};
    SampleSet empty;
    empty.dim = 1;
    EXPECT_THROW(round_trip_error(u, CostModel::quadratic(), 1.0, empty), std::invalid_argument);

    SampleSet single;
    single.dim = 1;
    single.points = {1.0};
    EXPECT_THROW(round_trip_error(u, CostModel::quadratic(), 1.0, single), std::invalid_argument);

    SampleSet repeated;
    repeated.dim = 1;
    repeated.points = {2.0, 2.0, 2.0};
    EXPECT_THROW(round_trip_error(u, CostModel::quadratic(), 1.0, repeated), std::invalid_argument);
}

TEST(MetricsCsv, ExactFileContents) {
    const auto path = temp_path("metrics.csv");
    save_metrics_csv(path.string(), {{"uvp", "forward", 25.0}, {"emd", "backward", 0.5}});
    EXPECT_EQ(slurp(path), "metric,direction,value\nuvp,forward,25\nemd,backward,0.5\n");
    EXPECT_THROW(save_metrics_csv("/nonexistent_dir_zz/m.csv", {}), std::runtime_error);
}

TEST(SvgScatter, WritesWellFormedPlot) {
    SampleSet a, b;
    a.dim = b.dim = 2;
    a.points = {0.0, 0.0, 1.0, 1.0, -1.0, 0.5};
    b.points = {2.0, -0.5, 0.25, 0.75};
    SvgSegments seg;
    seg.from = {0.0, 0.0, 1.0, 1.0};
    seg.to = {2.0, -0.5, 0.25, 0.75};

    const auto path = temp_path("plot.svg");
    save_svg_scatter(path.string(), {{&a, "#ff0000", 2.0}, {&b, "#0000ff", 1.5}}, &seg);
    const std::string svg = slurp(path);
    EXPECT_EQ(svg.rfind("<svg xmlns", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    EXPECT_EQ(count_occurrences(svg, "<circle"), 5u);
    EXPECT_EQ(count_occurrences(svg, "<line"), 2u);
    EXPECT_NE(svg.find("#ff0000"), std::string::npos);

    // Degenerate cloud still produces a valid file via the fallback viewport.
    SampleSet one;
    one.dim = 2;
    one.points = {0.5, 0.5};
    const auto path2 = temp_path("plot_one.svg");
    save_svg_scatter(path2.string(), {{&one, "#00aa00", 1.0}});
    EXPECT_EQ(count_occurrences(slurp(path2), "<circle"), 1u);

    EXPECT_THROW(save_svg_scatter("/nonexistent_dir_zz/p.svg", {{&a, "#000000", 1.0}}),
                 std::runtime_error);
}
