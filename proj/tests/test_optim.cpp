#include <gtest/gtest.h>

#include "ritz/optim.hpp"

using namespace ritz;

namespace {

std::pair<double, Eigen::VectorXd> half_norm(const Eigen::VectorXd& x) { return {0.5 * x.squaredNorm(), x}; }

std::pair<double, Eigen::VectorXd> rosenbrock(const Eigen::VectorXd& x)
{
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    Eigen::VectorXd g(2);
    g << -2.0 * a - 400.0 * x[0] * b, 200.0 * b;
    return {a * a + 100.0 * b * b, g};
}

} // namespace

TEST(Adam, FirstStepClosedForm)
{
    AdamState st = AdamState::fresh(1);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
    adam_step(st, p, Eigen::VectorXd::Ones(1), 1e-3);
    EXPECT_NEAR(p[0], -1e-3 * 1.0 / (1.0 + 1e-8), 1e-15);
    EXPECT_NEAR(p[0], -9.99999e-4, 1e-9); // six significant digits
    EXPECT_EQ(st.t, 1);
}

TEST(Adam, ZeroGradientLeavesParams)
{
    AdamState st = AdamState::fresh(3);
    Eigen::VectorXd p(3);
    p << 1.0, -2.0, 3.0;
    const Eigen::VectorXd before = p;
    adam_step(st, p, Eigen::VectorXd::Zero(3), 1e-2);
    EXPECT_EQ(p, before);
    EXPECT_EQ(st.t, 1);
}

TEST(Adam, MovesAgainstGradientSign)
{
    AdamState st = AdamState::fresh(4);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd g(4);
    g << 3.0, -0.001, 1e4, -7.0;
    adam_step(st, p, g, 0.1);
    for (int i = 0; i < 4; ++i) EXPECT_LT(p[i] * g[i], 0.0);
}

TEST(Adam, ZeroLearningRateIsIdentity)
{
    AdamState st = AdamState::fresh(2);
    Eigen::VectorXd p(2);
    p << 0.3, 0.4;
    const Eigen::VectorXd before = p;
    for (int k = 0; k < 5; ++k) adam_step(st, p, Eigen::Vector2d(1.0, -2.0), 0.0);
    EXPECT_EQ(p, before);
}

TEST(Adam, NonFiniteGradientDiverges)
{
    AdamState st = AdamState::fresh(2);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
    try {
        adam_step(st, p, Eigen::Vector2d(1.0, std::numeric_limits<double>::quiet_NaN()), 1e-3);
        FAIL();
    } catch (const DivergedError& e) {
        EXPECT_EQ(e.term(), "gradient");
    }
    EXPECT_THROW(adam_step(st, p, Eigen::VectorXd::Zero(3), 1e-3), ConfigError);
}

TEST(Lbfgs, QuadraticInFewIterations)
{
    const auto r = lbfgs_refine(half_norm, Eigen::Vector2d(1.0, 1.0));
    EXPECT_LT(r.params.norm(), 1e-8);
    EXPECT_LE(r.iterations, 3);
    EXPECT_EQ(r.stop, LbfgsStop::gradient);
}

TEST(Lbfgs, Rosenbrock)
{
    LbfgsConfig cfg;
    cfg.max_iters = 100;
    cfg.grad_tol = 1e-10;
    const auto r = lbfgs_refine(rosenbrock, Eigen::Vector2d(-1.2, 1.0), cfg);
    EXPECT_LT(r.value, 1e-8);
    EXPECT_LE(r.iterations, 100);
}

TEST(Lbfgs, AlreadyConvergedDoesNothing)
{
    LbfgsConfig cfg;
    cfg.grad_tol = 1e-3;
    const Eigen::Vector2d x0(1e-5, -1e-5);
    const auto r = lbfgs_refine(half_norm, x0, cfg);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.params, x0);
    EXPECT_EQ(r.evaluations, 1);
}

TEST(Lbfgs, MonotoneTraceAndDeterministic)
{
    Eigen::VectorXd x0(6);
    x0 << -1.2, 1.0, -1.2, 1.0, 0.5, 0.3;
    auto chained = [](const Eigen::VectorXd& x) {
        double f = 0.0;
        Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
        for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
            const auto [fi, gi] = rosenbrock(x.segment<2>(i));
            f += fi;
            g.segment<2>(i) += gi;
        }
        return std::pair<double, Eigen::VectorXd>{f, g};
    };
    const auto a = lbfgs_refine(chained, x0);
    const auto b = lbfgs_refine(chained, x0);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.trace, b.trace);
    double prev = a.initial_value;
    for (double v : a.trace) {
        EXPECT_LE(v, prev);
        prev = v;
    }
    EXPECT_LT(a.value, 1e-10);
}

TEST(Lbfgs, BrokenGradientReturnsBestSoFar)
{
    // The reported gradient points uphill, so no step satisfies the Wolfe conditions.
    auto liar = [](const Eigen::VectorXd& x) {
        return std::pair<double, Eigen::VectorXd>{0.5 * x.squaredNorm(), -x};
    };
    const Eigen::Vector2d x0(1.0, 2.0);
    const auto r = lbfgs_refine(liar, x0);
    EXPECT_TRUE(r.warning);
    EXPECT_EQ(r.stop, LbfgsStop::line_search);
    EXPECT_LE(r.value, r.initial_value);
}

TEST(Lbfgs, EvaluationBudget)
{
    LbfgsConfig cfg;
    cfg.max_evals = 7;
    cfg.grad_tol = 0.0;
    const auto r = lbfgs_refine(rosenbrock, Eigen::Vector2d(-1.2, 1.0), cfg);
    EXPECT_EQ(r.stop, LbfgsStop::max_evals);
    EXPECT_LE(r.evaluations, 7);
    EXPECT_LE(r.value, r.initial_value);
}

TEST(Lbfgs, NonFiniteTrialIsBacktracked)
{
    auto wall = [](const Eigen::VectorXd& x) {
        if (x[0] < -0.5) return std::pair<double, Eigen::VectorXd>{std::numeric_limits<double>::infinity(), x};
        return std::pair<double, Eigen::VectorXd>{0.5 * (x[0] - 1.0) * (x[0] - 1.0), Eigen::VectorXd::Constant(1, x[0] - 1.0)};
    };
    const auto r = lbfgs_refine(wall, Eigen::VectorXd::Constant(1, 50.0));
    EXPECT_NEAR(r.params[0], 1.0, 1e-8);
}

TEST(Lbfgs, InvalidConfig)
{
    LbfgsConfig cfg;
    cfg.wolfe_c1 = 0.95;
    EXPECT_THROW(lbfgs_refine(half_norm, Eigen::Vector2d(1, 1), cfg), ConfigError);
}
