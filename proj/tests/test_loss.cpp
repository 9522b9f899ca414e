#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ritz/augmented_lagrangian.hpp"
#include "ritz/loss.hpp"
#include "ritz/sampling.hpp"

using namespace ritz;

namespace {

EvalResult constant_eval(int n, int d, double u, Eigen::VectorXd grad = {})
{
    EvalResult r;
    r.values = Eigen::VectorXd::Constant(n, u);
    r.spatial_grads = Eigen::MatrixXd::Zero(d, n);
    if (grad.size() == d) r.spatial_grads.colwise() = grad;
    return r;
}

// Network with only the bypass active: u(x) = w . x + beta2.
NetParams linear_network(int d, const Eigen::VectorXd& w, double b)
{
    NetParams p = init_network({d, 4, 1}, 0);
    p.flat().setZero();
    p.beta1() = 1.0;
    p.w() = w;
    p.beta2() = b;
    return p;
}

} // namespace

TEST(EnergyTerm, ConstantStates)
{
    const LossSpec spec{0.04, 0.6, 0.0, 1.0};
    EXPECT_NEAR(energy_term(constant_eval(10, 1, 0.6), spec), 0.1024, 1e-15);
    EXPECT_EQ(energy_term(constant_eval(10, 2, 1.0), spec), 0.0);
    EXPECT_EQ(energy_term(constant_eval(10, 2, -1.0), spec), 0.0);
}

TEST(EnergyTerm, GradientContribution)
{
    const LossSpec spec{0.04, 0.0, 0.0, 1.0};
    EXPECT_NEAR(energy_term(constant_eval(7, 2, 0.0, Eigen::Vector2d(1.0, 0.0)), spec), 0.2508, 1e-15);
}

TEST(EnergyTerm, ScalesWithVolume)
{
    const LossSpec spec{0.04, 0.6, 0.0, 2.5};
    EXPECT_NEAR(energy_term(constant_eval(4, 1, 0.6), spec), 2.5 * 0.1024, 1e-15);
}

TEST(EnergyTerm, NonNegative)
{
    const LossSpec spec{0.1, 0.0, 0.0, 1.0};
    EvalResult r;
    r.values = Eigen::VectorXd::LinSpaced(41, -2.0, 2.0);
    r.spatial_grads = Eigen::MatrixXd::Random(3, 41);
    EXPECT_GE(energy_term(r, spec), 0.0);
}

TEST(EnergyTerm, EmptyIsConfigError)
{
    EXPECT_THROW(energy_term(EvalResult{}, LossSpec{}), ConfigError);
}

TEST(MeanField, Examples)
{
    const LossSpec spec{0.04, 0.0, 0.0, 1.0};
    EXPECT_DOUBLE_EQ(mean_field(constant_eval(5, 1, 0.6), spec), 0.6);
    EvalResult r;
    r.values = Eigen::Vector2d(-1.0, 1.0);
    EXPECT_EQ(mean_field(r, spec), 0.0);

    const PointBatch b = sobol_batch(4096, 1, 1, Box::unit(1));
    EvalResult s;
    s.values = (2.0 * std::numbers::pi * b.points.row(0).transpose().array()).sin().matrix();
    EXPECT_LT(std::abs(mean_field(s, spec)), 1e-3);
}

TEST(AugmentedLagrangeTerm, Examples)
{
    const LossSpec spec{0.04, 0.5, 0.0, 1.0};
    EXPECT_NEAR(augmented_lagrange_term(0.6, spec, ALState{0.0, 2.0, 2.0, 1.2, 0}), 0.01, 1e-15);
    EXPECT_NEAR(augmented_lagrange_term(1.0, spec, ALState{1.0, 0.0, 2.0, 1.2, 0}), 0.5, 1e-15);
    EXPECT_EQ(augmented_lagrange_term(0.5, spec, ALState{3.0, 7.0, 9.0, 1.2, 0}), 0.0);
}

TEST(AugmentedLagrangeTerm, QuadraticRecoversParameters)
{
    const LossSpec spec{0.04, 0.0, 0.0, 1.0};
    const ALState al{0.37, 1.9, 2.0, 1.2, 0};
    const double c = 0.05;
    const double f1 = augmented_lagrange_term(c, spec, al);
    const double f2 = augmented_lagrange_term(2 * c, spec, al);
    const double f3 = augmented_lagrange_term(3 * c, spec, al);
    // f(kc) = lambda k c + mu/2 k^2 c^2
    const double mu = (f3 - 2 * f2 + f1) / (c * c);
    const double lambda = (f2 - f1) / c - 1.5 * mu * c;
    EXPECT_NEAR(mu, al.mu, 1e-10);
    EXPECT_NEAR(lambda, al.lambda, 1e-10);
    EXPECT_NEAR(f3 - 3 * f2 + 3 * f1, 0.0, 1e-15); // third difference vanishes
}

TEST(AssembleTotal, Examples)
{
    EXPECT_NEAR(assemble_total(0.1, 0.01, 0.0, 1.0).total, 0.11, 1e-15);
    EXPECT_NEAR(assemble_total(0.1, 0.0, 0.02, 10.0).total, 0.3, 1e-15);
    EXPECT_EQ(assemble_total(0.0, 0.0, 0.0, 0.0).total, 0.0);
    const LossBreakdown b = assemble_total(0.2, 0.3, 0.4, 2.0, 0.7, 0.1);
    EXPECT_EQ(b.mean_u, 0.7);
    EXPECT_EQ(b.constraint, 0.1);
    EXPECT_EQ(b.boundary, 0.4);
}

TEST(BoundaryPenalty, Examples)
{
    const FeatureMap id1 = identity_features(1);
    const BoundaryPairs p1 = make_boundary_pairs(Box::unit(1), 8);
    ASSERT_EQ(p1.axes(), 1u);
    EXPECT_EQ(p1.lower[0].size(), 1);
    EXPECT_EQ(boundary_penalty(linear_network(1, Eigen::VectorXd::Constant(1, 0.0), 0.4), id1, p1), 0.0);
    EXPECT_NEAR(boundary_penalty(linear_network(1, Eigen::VectorXd::Constant(1, 1.0), 0.0), id1, p1), 1.0, 1e-15);

    // u = 2x + 3y: mismatch 2 across x, 3 across y.
    const BoundaryPairs p2 = make_boundary_pairs(Box::unit(2), 11);
    EXPECT_EQ(p2.lower[0].size(), 11);
    EXPECT_NEAR(boundary_penalty(linear_network(2, Eigen::Vector2d(2.0, 3.0), 0.0), identity_features(2), p2), 13.0,
                1e-12);
}

TEST(BoundaryPenalty, PairsLieOnOppositeFaces)
{
    const Box box{{0.0, -1.0, 0.5}, {2.0, 1.0, 1.5}};
    const BoundaryPairs p = make_boundary_pairs(box, 5);
    ASSERT_EQ(p.axes(), 3u);
    for (int j = 0; j < 3; ++j) {
        EXPECT_EQ(p.lower[j].size(), 25);
        EXPECT_TRUE((p.lower[j].points.row(j).array() == box.lo[j]).all());
        EXPECT_TRUE((p.upper[j].points.row(j).array() == box.hi[j]).all());
        for (int k = 0; k < 3; ++k)
            if (k != j) EXPECT_EQ(p.lower[j].points.row(k), p.upper[j].points.row(k));
    }
}

TEST(BoundaryPenalty, RejectsIntegerFrequencyMap)
{
    const FeatureMap sep = build_feature_map(FeatureKind::separable, 1, {1.0}, 2, {}, {}, 0);
    const NetParams p = init_network({sep.output_dim(), 8, 2}, 0);
    EXPECT_THROW(boundary_penalty(p, sep, make_boundary_pairs(Box::unit(1), 4)), ConfigError);
}

TEST(BoundaryPenalty, WrappedRandomFeaturesArePeriodicOnTheBox)
{
    // With mod-L wrapping the right face maps back to the left one.
    const FeatureMap rff = build_feature_map(FeatureKind::random, 2, {1.0, 1.0}, {}, 16, 3.0, 5, true);
    const NetParams p = init_network({rff.output_dim(), 8, 2}, 1);
    EXPECT_LT(boundary_penalty(p, rff, make_boundary_pairs(Box::unit(2), 9)), 1e-24);
}

TEST(UpdateMultiplier, Examples)
{
    const ALState a = update_multiplier(ALState{0.0, 1.0, 2.0, 1.2, 0}, 0.5, 3);
    EXPECT_DOUBLE_EQ(a.lambda, 0.5);
    EXPECT_DOUBLE_EQ(a.mu, 1.2);

    const ALState b = update_multiplier(ALState{0.0, 1.9, 2.0, 1.2, 0}, 0.0, 3);
    EXPECT_EQ(b.mu, 2.0);

    const ALState c = update_multiplier(ALState{0.25, 1.0, 2.0, 1.2, 0}, 0.0, 3);
    EXPECT_EQ(c.lambda, 0.25);
    EXPECT_DOUBLE_EQ(c.mu, 1.2);
}

TEST(UpdateMultiplier, FrozenCyclesKeepLambdaZero)
{
    ALState al{0.0, 1.0, 2.0, 1.2, 2};
    al = update_multiplier(al, 0.3, 0);
    EXPECT_EQ(al.lambda, 0.0);
    al = update_multiplier(al, 0.3, 1);
    EXPECT_EQ(al.lambda, 0.0);
    const double mu = al.mu;
    al = update_multiplier(al, 0.3, 2);
    EXPECT_DOUBLE_EQ(al.lambda, mu * 0.3); // uses the penalty in force during the cycle
}

TEST(UpdateMultiplier, PenaltyMonotoneAndCapped)
{
    ALState al{0.0, 0.5, 2.0, 1.2, 1};
    double prev = al.mu;
    for (int k = 0; k < 30; ++k) {
        al = update_multiplier(al, 0.1 * std::sin(k), k);
        EXPECT_GE(al.mu, prev);
        EXPECT_LE(al.mu, al.mu_max);
        EXPECT_GT(al.mu, 0.0);
        prev = al.mu;
    }
    EXPECT_EQ(al.mu, 2.0);
}
