#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ncf/linalg.hpp"
#include "ncf/rng.hpp"

using namespace ncf;

TEST(Rng, Uniform01RangeAndDeterminism) {
    Rng a(7), b(7);
    for (int i = 0; i < 10000; ++i) {
        const double v = a.uniform01();
        EXPECT_GE(v, 0.0);
        EXPECT_LT(v, 1.0);
        EXPECT_EQ(v, b.uniform01());
    }
}

TEST(Rng, UniformBounds) {
    Rng r(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = r.uniform(-3.0, 5.0);
        EXPECT_GE(v, -3.0);
        EXPECT_LT(v, 5.0);
    }
}

TEST(Rng, NormalMoments) {
    Rng r(42);
    const int n = 200000;
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = r.normal();
        mean += v;
        var += v * v;
    }
    mean /= n;
    var = var / n - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Rng, BelowIsInRangeAndCoversAll) {
    Rng r(3);
    std::vector<int> seen(10, 0);
    for (int i = 0; i < 5000; ++i) {
        const auto v = r.below(10);
        ASSERT_LT(v, 10u);
        ++seen[static_cast<std::size_t>(v)];
    }
    for (int c : seen) EXPECT_GT(c, 0);
}

TEST(Rng, ShuffleIsPermutation) {
    Rng r(11);
    std::vector<int> v(100);
    for (int i = 0; i < 100; ++i) v[static_cast<std::size_t>(i)] = i;
    r.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
    // astronomically unlikely to be untouched
    bool moved = false;
    for (int i = 0; i < 100; ++i) moved |= v[static_cast<std::size_t>(i)] != i;
    EXPECT_TRUE(moved);
}

TEST(Mat, MatmulMatvecTranspose) {
    Mat a(2, 3), b(3, 2);
    double k = 1.0;
    for (double& v : a.a) v = k++;
    for (double& v : b.a) v = k++;
    const Mat c = matmul(a, b);  // [[1,2,3],[4,5,6]] * [[7,8],[9,10],[11,12]]
    EXPECT_DOUBLE_EQ(c(0, 0), 58.0);
    EXPECT_DOUBLE_EQ(c(0, 1), 64.0);
    EXPECT_DOUBLE_EQ(c(1, 0), 139.0);
    EXPECT_DOUBLE_EQ(c(1, 1), 154.0);
    const auto v = matvec(a, {1.0, 0.0, -1.0});
    EXPECT_DOUBLE_EQ(v[0], -2.0);
    EXPECT_DOUBLE_EQ(v[1], -2.0);
    const Mat t = transpose(a);
    EXPECT_EQ(t.rows, 3);
    EXPECT_DOUBLE_EQ(t(2, 1), 6.0);
    EXPECT_THROW(matmul(a, a), std::invalid_argument);
    EXPECT_THROW(matvec(a, {1.0}), std::invalid_argument);
}

TEST(Jacobi, DiagonalMatrix) {
    Mat m(3, 3);
    m(0, 0) = 5.0;
    m(1, 1) = -1.0;
    m(2, 2) = 2.0;
    const EigenSym e = jacobi_eigen_sym(m);
    EXPECT_DOUBLE_EQ(e.values[0], -1.0);
    EXPECT_DOUBLE_EQ(e.values[1], 2.0);
    EXPECT_DOUBLE_EQ(e.values[2], 5.0);
}

TEST(Jacobi, ReconstructionAndOrthogonality) {
    Rng rng(5);
    for (int d : {2, 5, 16, 64}) {
        Mat m(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                const double v = rng.uniform(-2.0, 2.0);
                m(i, j) = v;
                m(j, i) = v;
            }
        const EigenSym e = jacobi_eigen_sym(m);
        // Q diag Q' == m
        Mat rec(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int k = 0; k < d; ++k)
                    s += e.vectors(i, k) * e.values[static_cast<std::size_t>(k)] * e.vectors(j, k);
                rec(i, j) = s - m(i, j);
            }
        EXPECT_LT(frobenius(rec), 1e-10 * (1.0 + frobenius(m))) << "d=" << d;
        // Q'Q == I
        const Mat qtq = matmul(transpose(e.vectors), e.vectors);
        Mat diff = qtq;
        for (int i = 0; i < d; ++i) diff(i, i) -= 1.0;
        EXPECT_LT(frobenius(diff), 1e-12) << "d=" << d;
        // ascending order
        for (int i = 0; i + 1 < d; ++i)
            EXPECT_LE(e.values[static_cast<std::size_t>(i)], e.values[static_cast<std::size_t>(i + 1)]);
    }
}

TEST(Jacobi, RejectsNonSymmetric) {
    Mat m(2, 2);
    m(0, 1) = 1.0;
    m(1, 0) = 0.0;
    EXPECT_THROW(jacobi_eigen_sym(m), std::invalid_argument);
    EXPECT_THROW(jacobi_eigen_sym(Mat(2, 3)), std::invalid_argument);
}

TEST(SpectralApply, SquareOfSqrtIsIdentityFunction) {
    Rng rng(9);
    Mat m(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) {
            const double v = rng.uniform(-1.0, 1.0);
            m(i, j) = v;
            m(j, i) = v;
        }
    for (int i = 0; i < 4; ++i) m(i, i) += 4.0;  // make it positive definite
    const EigenSym e = jacobi_eigen_sym(m);
    const Mat r = spectral_apply(e, [](double v) { return std::sqrt(v); });
    Mat rr = matmul(r, r);
    for (std::size_t i = 0; i < rr.a.size(); ++i) rr.a[i] -= m.a[i];
    EXPECT_LT(frobenius(rr), 1e-10);
}

TEST(RandomOrthogonal, ColumnsOrthonormal) {
    Rng rng(13);
    for (int d : {1, 3, 8, 32}) {
        const Mat q = random_orthogonal(d, rng);
        const Mat qtq = matmul(transpose(q), q);
        Mat diff = qtq;
        for (int i = 0; i < d; ++i) diff(i, i) -= 1.0;
        EXPECT_LT(frobenius(diff), 1e-12) << "d=" << d;
    }
}

TEST(MaxAsymmetrySymmetrize, Work) {
    Mat m(2, 2);
    m(0, 1) = 1.0;
    m(1, 0) = 3.0;
    EXPECT_DOUBLE_EQ(max_asymmetry(m), 2.0);
    symmetrize(m);
    EXPECT_DOUBLE_EQ(m(0, 1), 2.0);
    EXPECT_DOUBLE_EQ(m(1, 0), 2.0);
}
