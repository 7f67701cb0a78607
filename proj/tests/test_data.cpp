#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "ncf/data.hpp"
#include "ncf/rng.hpp"

using namespace ncf;

namespace {

SampleSet make_set(int dim, std::vector<double> pts, std::vector<int> labels = {}) {
    SampleSet s;
    s.dim = dim;
    s.points = std::move(pts);
    s.labels = std::move(labels);
    s.norm = Normalization::identity(dim);
    return s;
}

}  // namespace

TEST(Normalize, BoxMapsOntoUnitBox) {
    const auto raw = make_set(2, {0.0, -2.0, 4.0, 2.0, 2.0, 0.0});
    const auto n = normalize(raw, NormalizeMode::Box);
    EXPECT_DOUBLE_EQ(n.norm.shift[0], 2.0);
    EXPECT_DOUBLE_EQ(n.norm.scale[0], 2.0);
    EXPECT_DOUBLE_EQ(n.norm.shift[1], 0.0);
    EXPECT_DOUBLE_EQ(n.norm.scale[1], 2.0);
    double lo0 = 1e300, hi0 = -1e300;
    for (std::size_t i = 0; i < n.size(); ++i) {
        lo0 = std::min(lo0, n.row(i)[0]);
        hi0 = std::max(hi0, n.row(i)[0]);
    }
    EXPECT_DOUBLE_EQ(lo0, -1.0);
    EXPECT_DOUBLE_EQ(hi0, 1.0);

    const auto back = denormalize(n);
    EXPECT_TRUE(back.norm.is_identity());
    for (std::size_t i = 0; i < raw.points.size(); ++i)
        EXPECT_NEAR(back.points[i], raw.points[i], 1e-12);
}

TEST(Normalize, StandardizeCentersAndScales) {
    Rng rng(3);
    std::vector<double> pts;
    for (int i = 0; i < 500; ++i) {
        pts.push_back(5.0 + 3.0 * rng.normal());
        pts.push_back(-2.0 + 0.5 * rng.normal());
    }
    const auto n = normalize(make_set(2, pts), NormalizeMode::Standardize);
    for (int k = 0; k < 2; ++k) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < n.size(); ++i) mean += n.row(i)[k];
        mean /= static_cast<double>(n.size());
        for (std::size_t i = 0; i < n.size(); ++i) {
            const double d = n.row(i)[k] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n.size());
        EXPECT_NEAR(mean, 0.0, 1e-12);
        EXPECT_NEAR(var, 1.0, 1e-12);
    }
}

TEST(Normalize, DegenerateDimensionKeepsScaleOne) {
    const auto n = normalize(make_set(2, {1.0, 7.0, 3.0, 7.0}), NormalizeMode::Box);
    EXPECT_DOUBLE_EQ(n.norm.scale[1], 1.0);
    EXPECT_DOUBLE_EQ(n.norm.shift[1], 7.0);
    EXPECT_DOUBLE_EQ(n.row(0)[1], 0.0);
    SampleSet empty;
    empty.dim = 2;
    EXPECT_THROW(normalize(empty), std::invalid_argument);
}

TEST(Normalize, FrameTransformsInvertEachOther) {
    Normalization nm;
    nm.shift = {1.0, -2.0};
    nm.scale = {3.0, 0.5};
    const double raw[] = {2.5, -1.75};
    double frame[2], back[2];
    to_frame(nm, raw, frame, 2);
    EXPECT_DOUBLE_EQ(frame[0], 0.5);
    EXPECT_DOUBLE_EQ(frame[1], 0.5);
    from_frame(nm, frame, back, 2);
    EXPECT_DOUBLE_EQ(back[0], raw[0]);
    EXPECT_DOUBLE_EQ(back[1], raw[1]);
}

TEST(Normalize, PooledIsotropicFrameIsSharedAndScalar) {
    const auto a = make_set(2, {-1.0, 0.0, 1.0, 1.0});
    const auto b = make_set(2, {3.0, -1.0, 5.0, 0.5});
    const auto nm = pooled_isotropic_norm({&a, &b});
    // pooled box: x in [-1,5], y in [-1,1]
    EXPECT_DOUBLE_EQ(nm.shift[0], 2.0);
    EXPECT_DOUBLE_EQ(nm.shift[1], 0.0);
    EXPECT_DOUBLE_EQ(nm.scale[0], 3.0);
    EXPECT_DOUBLE_EQ(nm.scale[1], 3.0);  // same scalar on every axis

    const auto fa = apply_frame(a, nm);
    EXPECT_FALSE(fa.norm.is_identity());
    EXPECT_THROW(apply_frame(fa, nm), std::invalid_argument);
    const auto back = denormalize(fa);
    for (std::size_t i = 0; i < a.points.size(); ++i)
        EXPECT_NEAR(back.points[i], a.points[i], 1e-12);

    const auto c = make_set(1, {0.0});
    EXPECT_THROW(pooled_isotropic_norm({&a, &c}), std::invalid_argument);
    EXPECT_THROW(pooled_isotropic_norm({}), std::invalid_argument);
}

TEST(Samplers, DeterministicPerSeed) {
    for (const char* name : {"swiss_roll", "double_moons", "checkerboard", "eight_gaussians",
                             "vertical_gaussians", "horizontal_gaussians"}) {
        Rng r1(11), r2(11), r3(12);
        const auto a = sample_named(name, 200, r1);
        const auto b = sample_named(name, 200, r2);
        const auto c = sample_named(name, 200, r3);
        EXPECT_EQ(a.points, b.points) << name;
        EXPECT_EQ(a.labels, b.labels) << name;
        EXPECT_NE(a.points, c.points) << name;
        EXPECT_EQ(a.size(), 200u);
        EXPECT_EQ(a.dim, 2);
    }
    Rng rng(0);
    EXPECT_THROW(sample_named("nope", 10, rng), std::invalid_argument);
}

TEST(Samplers, ToyCloudsStayOnScale) {
    Rng rng(5);
    for (const char* name : {"swiss_roll", "double_moons"}) {
        const auto s = sample_named(name, 2000, rng);
        for (std::size_t i = 0; i < s.size(); ++i) {
            EXPECT_LT(std::abs(s.row(i)[0]), 1.3) << name;
            EXPECT_LT(std::abs(s.row(i)[1]), 1.3) << name;
        }
    }
}

TEST(Samplers, CheckerboardPutsNoMassOnOddCells) {
    Rng rng(17);
    const auto s = sample_checkerboard(4000, rng);
    std::vector<int> counts(16, 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double x = s.row(i)[0], y = s.row(i)[1];
        ASSERT_GE(x, -1.0);
        ASSERT_LT(x, 1.0);
        ASSERT_GE(y, -1.0);
        ASSERT_LT(y, 1.0);
        const int ci = static_cast<int>((x + 1.0) / 0.5);
        const int cj = static_cast<int>((y + 1.0) / 0.5);
        ASSERT_EQ((ci + cj) % 2, 0) << "mass on an odd cell at row " << i;
        ++counts[static_cast<std::size_t>(4 * ci + cj)];
    }
    int occupied = 0;
    for (int c : counts) occupied += c > 0 ? 1 : 0;
    EXPECT_EQ(occupied, 8);
}

TEST(Samplers, EightGaussiansBalancedAndConcentrated) {
    Rng rng(29);
    const std::size_t n = 8000;
    const auto s = sample_eight_gaussians(n, rng);
    const double pi = 3.14159265358979323846;
    std::vector<int> counts(8, 0);
    std::size_t within = 0;
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double bd = 1e300;
        for (int k = 0; k < 8; ++k) {
            const double a = 2.0 * pi * k / 8.0;
            const double dx = s.row(i)[0] - 0.8 * std::cos(a);
            const double dy = s.row(i)[1] - 0.8 * std::sin(a);
            const double d2 = dx * dx + dy * dy;
            if (d2 < bd) {
                bd = d2;
                best = k;
            }
        }
        ++counts[static_cast<std::size_t>(best)];
        if (bd <= 16.0 * 0.05 * 0.05) ++within;  // 4 sigma
    }
    double chi2 = 0.0;
    const double expect = static_cast<double>(n) / 8.0;
    for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
    EXPECT_LT(chi2, 24.32);  // chi-square(7) at p = 0.001
    EXPECT_GE(static_cast<double>(within) / static_cast<double>(n), 0.998);
}

TEST(Samplers, LabeledMixturesTagClassByColumnOrRow) {
    Rng rng(41);
    const auto v = sample_named("vertical_gaussians", 600, rng);
    ASSERT_EQ(v.labels.size(), 600u);
    for (std::size_t i = 0; i < v.size(); ++i) {
        // vertical split: class 0 lives at x ~ -0.5, class 1 at x ~ +0.5
        EXPECT_EQ(v.labels[i], v.row(i)[0] > 0.0 ? 1 : 0);
    }
    const auto h = sample_named("horizontal_gaussians", 600, rng);
    for (std::size_t i = 0; i < h.size(); ++i)
        EXPECT_EQ(h.labels[i], h.row(i)[1] > 0.0 ? 1 : 0);

    MixtureSpec bad;
    bad.centers = {{0.0, 0.0}};
    EXPECT_THROW(sample_labeled_mixture(bad, 5, rng), std::invalid_argument);
}

TEST(PointsCsv, RoundTripIsBitExact) {
    const std::string path = testing::TempDir() + "ncf_points.csv";
    const auto s = make_set(3, {1.0 / 3.0, 3.141592653589793, 1e-17, -0.0, 1e300, -7.25});
    save_points_csv(path, s);
    const auto r = load_points_csv(path);
    EXPECT_EQ(r.dim, 3);
    ASSERT_EQ(r.points.size(), s.points.size());
    for (std::size_t i = 0; i < s.points.size(); ++i) EXPECT_EQ(r.points[i], s.points[i]);
    EXPECT_TRUE(r.labels.empty());

    const std::string pl = testing::TempDir() + "ncf_points_labeled.csv";
    const auto sl = make_set(2, {0.5, -0.25, 2.0, 4.0}, {3, 0});
    save_points_csv(pl, sl);
    const auto rl = load_points_csv(pl);
    EXPECT_EQ(rl.points, sl.points);
    EXPECT_EQ(rl.labels, sl.labels);
    std::remove(path.c_str());
    std::remove(pl.c_str());
}

TEST(PointsCsv, RejectsMalformedFiles) {
    const std::string path = testing::TempDir() + "ncf_bad.csv";
    auto write = [&](const std::string& text) {
        std::ofstream f(path);
        f << text;
    };
    write("a,b\n1,2\n");
    EXPECT_THROW(load_points_csv(path), std::runtime_error);
    write("x0,x1\n1.0\n");
    EXPECT_THROW(load_points_csv(path), std::runtime_error);
    write("x0,x1,label\n1.0,2.0\n");
    EXPECT_THROW(load_points_csv(path), std::runtime_error);
    write("x1,x0\n1,2\n");
    EXPECT_THROW(load_points_csv(path), std::runtime_error);
    write("");
    EXPECT_THROW(load_points_csv(path), std::runtime_error);
    EXPECT_THROW(load_points_csv(testing::TempDir() + "ncf_definitely_missing.csv"),
                 std::runtime_error);
    std::remove(path.c_str());
}

TEST(PointsCsv, FullPrecisionFormattingRoundTrips) {
    for (double v : {1.0 / 3.0, 3.141592653589793, 1e-300, 1e300, 0.1, -12345.678901234567}) {
        const std::string s = format_full(v);
        EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
    }
}

TEST(BoundingBox, ExpandsByMarginPerAxis) {
    const auto a = make_set(2, {0.0, -1.0, 2.0, 3.0});
    std::vector<double> lo, hi;
    bounding_box({&a}, 0.05, lo, hi);
    EXPECT_DOUBLE_EQ(lo[0], -0.1);
    EXPECT_DOUBLE_EQ(hi[0], 2.1);
    EXPECT_DOUBLE_EQ(lo[1], -1.2);
    EXPECT_DOUBLE_EQ(hi[1], 3.2);
    EXPECT_THROW(bounding_box({}, 0.05, lo, hi), std::invalid_argument);
}
