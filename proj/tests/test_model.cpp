#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ncf/linalg.hpp"
#include "ncf/model.hpp"
#include "ncf/rng.hpp"

using namespace ncf;

namespace {

MlpPotential small_mlp(int dim, std::vector<int> hidden, Act kind, double kappa, bool quad,
                       std::uint64_t seed) {
    Activation a;
    a.kind = kind;
    a.beta = 100.0;
    return mlp_init(dim, hidden, a, kappa, quad, seed);
}

}  // namespace

TEST(MlpPotential, ParamCountMatchesHandCount) {
    const auto m = small_mlp(2, {64, 64}, Act::Tanh, 0.0, false, 0);
    EXPECT_EQ(m.param_count(), 4481u);
    EXPECT_EQ(m.params.size(), 4481u);

    // 3 features -> 64 -> 64 -> 1
    const auto shapes = m.layer_shapes();
    ASSERT_EQ(shapes.size(), 3u);
    EXPECT_EQ(shapes[0].in, 3);
    EXPECT_EQ(shapes[0].out, 64);
    EXPECT_EQ(shapes[0].w_ofs, 0u);
    EXPECT_EQ(shapes[0].b_ofs, 192u);
    EXPECT_EQ(shapes[1].w_ofs, 256u);
    EXPECT_EQ(shapes[2].in, 64);
    EXPECT_EQ(shapes[2].out, 1);
    EXPECT_EQ(shapes[2].w_ofs, 4416u);
    EXPECT_EQ(shapes[2].b_ofs, 4480u);

    const auto q = small_mlp(2, {64, 64}, Act::Tanh, 0.0, true, 0);
    EXPECT_EQ(q.layer_shapes()[0].in, 4);
}

TEST(MlpPotential, InitBoundsAndDeterminism) {
    const auto m = small_mlp(3, {16, 16}, Act::Softplus, 0.0, true, 42);
    for (const auto& s : m.layer_shapes()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.in));
        for (int i = 0; i < s.in * s.out; ++i) {
            const double w = m.params[s.w_ofs + static_cast<std::size_t>(i)];
            EXPECT_GE(w, -bound);
            EXPECT_LT(w, bound);
        }
        for (int i = 0; i < s.out; ++i)
            EXPECT_DOUBLE_EQ(m.params[s.b_ofs + static_cast<std::size_t>(i)], 0.0);
    }
    const auto m2 = small_mlp(3, {16, 16}, Act::Softplus, 0.0, true, 42);
    EXPECT_EQ(m.params, m2.params);
    const auto m3 = small_mlp(3, {16, 16}, Act::Softplus, 0.0, true, 43);
    EXPECT_NE(m.params, m3.params);
}

TEST(MlpPotential, InitRejectsBadShapes) {
    Activation a;
    EXPECT_THROW(mlp_init(0, {8}, a, 0.0, false, 0), std::invalid_argument);
    EXPECT_THROW(mlp_init(2, {8, 0}, a, 0.0, false, 0), std::invalid_argument);
    EXPECT_THROW(mlp_init(2, {8, 16}, a, 0.5, false, 0), std::invalid_argument);
    EXPECT_NO_THROW(mlp_init(2, {8, 8}, a, 0.5, false, 0));
}

TEST(MlpPotential, GradientsMatchFiniteDifferences) {
    struct Cfg {
        Act kind;
        double kappa;
        bool quad;
    };
    const Cfg cfgs[] = {{Act::Tanh, 0.0, false},
                        {Act::Tanh, 0.5, true},
                        {Act::Softplus, 0.0, true},
                        {Act::Softplus, 0.3, false}};
    Rng rng(7);
    for (const auto& cfg : cfgs) {
        const auto m = small_mlp(3, {8, 8}, cfg.kind, cfg.kappa, cfg.quad, 101);
        for (int trial = 0; trial < 4; ++trial) {
            std::vector<double> x(3);
            for (double& v : x) v = rng.uniform(-1.0, 1.0);
            const double t = rng.uniform01();
            const auto e = eval_potential(m, x.data(), t, true);

            const double eps = 1e-6;
            for (int k = 0; k < 3; ++k) {
                auto xp = x;
                xp[static_cast<std::size_t>(k)] += eps;
                const double hi = eval_potential(m, xp.data(), t).value;
                xp[static_cast<std::size_t>(k)] -= 2 * eps;
                const double lo = eval_potential(m, xp.data(), t).value;
                const double want = (hi - lo) / (2 * eps);
                EXPECT_NEAR(e.grad_x[static_cast<std::size_t>(k)], want, 1e-5 * (1.0 + std::abs(want)));
            }
            const double hi = eval_potential(m, x.data(), t + eps).value;
            const double lo = eval_potential(m, x.data(), t - eps).value;
            const double want = (hi - lo) / (2 * eps);
            EXPECT_NEAR(e.du_dt, want, 1e-5 * (1.0 + std::abs(want)));
        }
    }
}

TEST(QuadraticPotential, FrozenPointValues) {
    const Mat I = Mat::identity(2);
    Mat Z(2, 2);
    {
        const auto q = QuadraticPotential::from_knots(1.0, {0.0, 1.0}, {I, I},
                                                      {{0.0, 0.0}, {0.0, 0.0}}, {0.0, 0.0});
        const double x[] = {1.0, 2.0};
        const auto e = eval_potential(q, x, 0.25);
        EXPECT_DOUBLE_EQ(e.value, -2.5);
        EXPECT_DOUBLE_EQ(e.grad_x[0], -1.0);
        EXPECT_DOUBLE_EQ(e.grad_x[1], -2.0);
    }
    {
        const auto q = QuadraticPotential::from_knots(1.0, {0.0, 1.0}, {Z, Z},
                                                      {{1.0, 0.0}, {1.0, 0.0}}, {0.0, 0.0});
        const double x[] = {3.0, 5.0};
        const auto e = eval_potential(q, x, 0.8);
        EXPECT_DOUBLE_EQ(e.value, -3.0);
        EXPECT_DOUBLE_EQ(e.grad_x[0], -1.0);
        EXPECT_DOUBLE_EQ(e.grad_x[1], 0.0);
    }
}

TEST(QuadraticPotential, KnotInterpolationAndDerivative) {
    const Mat Z(1, 1);
    const auto q = QuadraticPotential::from_knots(1.0, {0.0, 0.5, 1.0}, {Z, Z, Z},
                                                  {{0.0}, {0.0}, {0.0}}, {0.0, 1.0, 5.0});
    EXPECT_DOUBLE_EQ(q.coeffs(0.25).t0, 0.5);
    EXPECT_DOUBLE_EQ(q.coeffs(0.75).t0, 3.0);
    EXPECT_DOUBLE_EQ(q.coeffs(1.0).t0, 5.0);
    EXPECT_DOUBLE_EQ(q.coeffs_dt(0.25).t0, 2.0);
    // right-sided derivative at the interior knot
    EXPECT_DOUBLE_EQ(q.coeffs_dt(0.5).t0, 8.0);
    EXPECT_DOUBLE_EQ(q.coeffs_dt(0.49).t0, 2.0);
}

TEST(QuadraticPotential, RejectsBadConstructionAndTimes) {
    const Mat Z(1, 1);
    EXPECT_THROW(QuadraticPotential::from_knots(1.0, {0.0}, {Z}, {{0.0}}, {0.0}),
                 std::invalid_argument);
    EXPECT_THROW(QuadraticPotential::from_knots(1.0, {0.0, 1.0}, {Z}, {{0.0}, {0.0}}, {0.0, 0.0}),
                 std::invalid_argument);
    const auto q = QuadraticPotential::from_knots(2.0, {0.0, 2.0}, {Z, Z}, {{0.0}, {0.0}},
                                                  {0.0, 0.0});
    EXPECT_THROW(q.coeffs(-0.1), std::out_of_range);
    EXPECT_THROW(q.coeffs(2.1), std::out_of_range);
    EXPECT_NO_THROW(q.coeffs(0.0));
    EXPECT_NO_THROW(q.coeffs(2.0));
    EXPECT_NO_THROW(q.coeffs(-1e-13));
}

TEST(QuadraticPotential, TimeDerivativeMatchesFiniteDifference) {
    // a pair of SPD-ish knot matrices so u genuinely varies in t
    Mat A(2, 2), B(2, 2);
    A(0, 0) = 1.0; A(0, 1) = 0.2; A(1, 0) = 0.2; A(1, 1) = 2.0;
    B(0, 0) = 0.5; B(0, 1) = -0.1; B(1, 0) = -0.1; B(1, 1) = 1.5;
    const auto q = QuadraticPotential::from_knots(1.0, {0.0, 1.0}, {A, B},
                                                  {{0.3, -0.7}, {1.0, 0.25}}, {0.1, -0.4});
    const double x[] = {0.8, -1.1};
    const double t = 0.37, eps = 1e-6;
    const auto e = eval_potential(q, x, t, true);
    const double hi = eval_potential(q, x, t + eps).value;
    const double lo = eval_potential(q, x, t - eps).value;
    EXPECT_NEAR(e.du_dt, (hi - lo) / (2 * eps), 1e-8);
}

TEST(Potential, BatchEvalMatchesPointwise) {
    const auto m = small_mlp(2, {8}, Act::Tanh, 0.0, true, 5);
    const Potential p = m;
    Rng rng(9);
    std::vector<double> rows;
    for (int i = 0; i < 6; ++i) {
        rows.push_back(rng.uniform(-1.0, 1.0));
        rows.push_back(rng.uniform(-1.0, 1.0));
        rows.push_back(rng.uniform01());
    }
    const auto batch = eval_with_input_grad(p, rows, 2);
    ASSERT_EQ(batch.values.size(), 6u);
    ASSERT_EQ(batch.input_grads.size(), 18u);
    for (int i = 0; i < 6; ++i) {
        const double* row = rows.data() + i * 3;
        const auto e = eval_potential(m, row, row[2], true);
        EXPECT_DOUBLE_EQ(batch.values[static_cast<std::size_t>(i)], e.value);
        EXPECT_DOUBLE_EQ(batch.input_grads[static_cast<std::size_t>(i * 3)], e.grad_x[0]);
        EXPECT_DOUBLE_EQ(batch.input_grads[static_cast<std::size_t>(i * 3 + 1)], e.grad_x[1]);
        EXPECT_DOUBLE_EQ(batch.input_grads[static_cast<std::size_t>(i * 3 + 2)], e.du_dt);
    }
    EXPECT_THROW(eval_with_input_grad(p, {1.0, 2.0}, 2), std::invalid_argument);
    EXPECT_THROW(eval_with_input_grad(p, {1.0, 2.0, 3.0, 4.0}, 3), std::invalid_argument);
}

TEST(TapeEmission, ConstInputMatchesDirectEvaluation) {
    struct Cfg {
        Act kind;
        double kappa;
        bool quad;
    };
    const Cfg cfgs[] = {{Act::Tanh, 0.0, false},
                        {Act::Softplus, 0.0, true},
                        {Act::Tanh, 0.4, true}};
    Rng rng(31);
    for (const auto& cfg : cfgs) {
        const auto m = small_mlp(2, {6, 6}, cfg.kind, cfg.kappa, cfg.quad, 77);
        for (int trial = 0; trial < 5; ++trial) {
            const double x[] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
            const double t = rng.uniform01();
            const auto e = eval_potential(m, x, t, true);

            Tape tape;
            const int pbase = tape.constants(m.params.data(), static_cast<int>(m.params.size()));
            const auto te = emit_mlp_const_input(tape, m, pbase, x, t, 3);
            EXPECT_NEAR(tape.val(te.value), e.value, 1e-12 * (1.0 + std::abs(e.value)));
            ASSERT_EQ(te.grad.size(), 3u);
            EXPECT_NEAR(tape.val(te.grad[0]), e.grad_x[0], 1e-12);
            EXPECT_NEAR(tape.val(te.grad[1]), e.grad_x[1], 1e-12);
            EXPECT_NEAR(tape.val(te.grad[2]), e.du_dt, 1e-12);
        }
    }
}

TEST(TapeEmission, VariableInputAdjointReproducesSpatialGradient) {
    for (bool quad : {false, true}) {
        const auto m = small_mlp(2, {8, 8}, Act::Softplus, 0.0, quad, 13);
        const double x[] = {0.6, -0.35};
        const double t = 0.4;
        Tape tape;
        const int pbase = tape.constants(m.params.data(), static_cast<int>(m.params.size()));
        const std::vector<int> xs = {tape.constant(x[0]), tape.constant(x[1])};
        const int u = emit_mlp_var_input(tape, m, pbase, xs, t);
        const auto e = eval_potential(m, x, t);
        EXPECT_NEAR(tape.val(u), e.value, 1e-12 * (1.0 + std::abs(e.value)));
        tape.backward(u);
        EXPECT_NEAR(tape.adj(xs[0]), e.grad_x[0], 1e-10);
        EXPECT_NEAR(tape.adj(xs[1]), e.grad_x[1], 1e-10);

        EXPECT_THROW(emit_mlp_var_input(tape, m, pbase, {xs[0]}, t), std::invalid_argument);
    }
}

TEST(LossParamGrad, MeanPotentialMatchesFiniteDifferences) {
    auto m = small_mlp(2, {8, 8}, Act::Tanh, 0.0, false, 3);
    Rng rng(21);
    std::vector<double> pts;
    const int n = 8;
    for (int i = 0; i < n * 2; ++i) pts.push_back(rng.uniform(-1.0, 1.0));

    auto build = [&](const MlpPotential& model) {
        return loss_param_grad(model, [&](Tape& tape, int pbase) {
            std::vector<int> vals;
            for (int i = 0; i < n; ++i)
                vals.push_back(emit_mlp_const_input(tape, model, pbase, &pts[static_cast<std::size_t>(i * 2)],
                                                    0.5, 0).value);
            return tape.affine(0.0, vals, std::vector<double>(vals.size(), 1.0 / n));
        });
    };

    const auto lg = build(m);
    double direct = 0.0;
    for (int i = 0; i < n; ++i)
        direct += eval_potential(m, &pts[static_cast<std::size_t>(i * 2)], 0.5).value / n;
    EXPECT_NEAR(lg.value, direct, 1e-12 * (1.0 + std::abs(direct)));

    double gmax = 0.0;
    for (double g : lg.grad) gmax = std::max(gmax, std::abs(g));
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t i = rng.below(m.params.size());
        const double eps = 1e-5;
        const double keep = m.params[i];
        m.params[i] = keep + eps;
        const double hi = build(m).value;
        m.params[i] = keep - eps;
        const double lo = build(m).value;
        m.params[i] = keep;
        const double fd = (hi - lo) / (2 * eps);
        const double rel = std::abs(lg.grad[i] - fd) /
                           (std::max(std::abs(lg.grad[i]), std::abs(fd)) + 1e-3 * gmax + 1e-12);
        EXPECT_LT(rel, 1e-5) << "param " << i;
    }
}

TEST(LossParamGrad, HalfSquaredNormGradientIsTheParameterVector) {
    const auto m = small_mlp(2, {5}, Act::Tanh, 0.0, false, 9);
    const auto lg = loss_param_grad(m, [&](Tape& tape, int pbase) {
        return tape.scale(0.5, tape.dot(pbase, pbase, static_cast<int>(m.params.size())));
    });
    double want = 0.0;
    for (double p : m.params) want += 0.5 * p * p;
    EXPECT_DOUBLE_EQ(lg.value, want);
    for (std::size_t i = 0; i < m.params.size(); ++i) EXPECT_DOUBLE_EQ(lg.grad[i], m.params[i]);
}

TEST(LossParamGrad, ThrowsOnNonFiniteLossNamingTheOp) {
    const auto m = small_mlp(1, {4}, Act::Tanh, 0.0, false, 1);
    try {
        loss_param_grad(m, [](Tape& tape, int) {
            const int big = tape.constant(1e308);
            return tape.mul(big, big);
        });
        FAIL() << "expected runtime_error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("mul"), std::string::npos);
    }
}
