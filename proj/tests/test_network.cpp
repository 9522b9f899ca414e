#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "ritz/features.hpp"
#include "ritz/network.hpp"
#include "ritz/sampling.hpp"
#include "ritz/tape.hpp"

using namespace ritz;

TEST(Activation, ReferenceValues)
{
    const auto a = activation(4.0);
    EXPECT_EQ(a.value, 8.0);
    EXPECT_EQ(a.d1, 3.0);
    const auto b = activation(-1.0);
    EXPECT_EQ(b.value, 0.0);
    EXPECT_EQ(b.d1, 0.0);
    const auto c = activation(1.0);
    EXPECT_EQ(c.value, 1.0);
    EXPECT_EQ(c.d1, 1.5);
    const auto z = activation(0.0);
    EXPECT_EQ(z.value, 0.0);
    EXPECT_EQ(z.d1, 0.0);
    EXPECT_EQ(z.d2, 0.0);
}

TEST(Activation, MonotoneAndContinuous)
{
    double prev = activation(-2.0).value;
    for (double z = -2.0; z <= 2.0; z += 1e-3) {
        const auto a = activation(z);
        EXPECT_GE(a.value, prev);
        EXPECT_LE(std::abs(a.value - prev), 1.5 * std::sqrt(2.0) * 1e-3 + 1e-12);
        prev = a.value;
    }
    EXPECT_LT(activation(1e-12).d1, 1e-5);
}

TEST(Init, KaimingVarianceOfHiddenMatrix)
{
    const NetParams p = init_network({38, 100, 3}, 123);
    const auto W = p.w2(1);
    const double mean = W.mean();
    const double var = (W.array() - mean).square().sum() / static_cast<double>(W.size() - 1);
    EXPECT_GE(var, 0.014);
    EXPECT_LE(var, 0.026);
}

TEST(Init, DeterministicWithZeroBiases)
{
    const Architecture arch{13, 20, 3};
    const NetParams a = init_network(arch, 5);
    const NetParams b = init_network(arch, 5);
    const NetParams c = init_network(arch, 6);
    EXPECT_EQ(a.flat(), b.flat());
    EXPECT_NE(a.flat(), c.flat());
    EXPECT_EQ(a.beta1(), 1.0);
    EXPECT_EQ(a.beta2(), 0.0);
    EXPECT_EQ(a.head_b(), 0.0);
    for (int blk = 0; blk < 3; ++blk) {
        EXPECT_TRUE(a.b1(blk).isZero(0.0));
        EXPECT_TRUE(a.b2(blk).isZero(0.0));
    }
}

TEST(Layout, ParameterCount)
{
    const Architecture arch{38, 100, 3};
    const Eigen::Index expect = 2 + 38 + (100 * 38 + 100 + 100 * 100 + 100) + 2 * (2 * 100 * 100 + 200) + 100 + 1;
    EXPECT_EQ(NetParams(arch).size(), expect);
    EXPECT_THROW(NetParams(Architecture{1, 0, 3}), ConfigError);
    EXPECT_THROW(NetParams(arch, Eigen::VectorXd::Zero(5)), ConfigError);
}

TEST(Forward, ConstantNetwork)
{
    NetParams p({2, 8, 2});
    p.beta2() = 0.7;
    const auto map = identity_features(2);
    EXPECT_EQ(network_forward(p, map, Eigen::Vector2d(0.3, -4.0)), 0.7);
    EXPECT_EQ(network_forward(p, map, Eigen::Vector2d(9.0, 1.0)), 0.7);
}

TEST(Forward, BypassOnly)
{
    NetParams p({2, 8, 2});
    p.beta1() = 2.0;
    p.w() << 1.0, 0.0;
    EXPECT_EQ(network_forward(p, identity_features(2), Eigen::Vector2d(3.0, 5.0)), 6.0);
}

TEST(Forward, ShapeMismatchIsConfigError)
{
    const NetParams p = init_network({3, 8, 2}, 1);
    EXPECT_THROW(network_forward(p, identity_features(2), Eigen::Vector2d(0.1, 0.2)), ConfigError);
}

TEST(Forward, HiddenWeightPerturbationMatchesGradient)
{
    const auto map = build_feature_map(FeatureKind::separable, 2, {1.0, 1.0}, 2, {}, {}, 0);
    NetParams p = init_network({map.output_dim(), 16, 3}, 77);
    const Eigen::Vector2d x(0.21, 0.64);

    Tape tape;
    tape.forward(p, map, x, false);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.size());
    Eigen::RowVectorXd seed = Eigen::RowVectorXd::Ones(1);
    tape.backward(p, seed, grad);

    const double delta = 1e-6;
    const Eigen::Index probes[] = {p.layout().blocks[1].w1 + 17, p.layout().blocks[2].w2 + 40,
                                   p.layout().blocks[0].w1 + 3, p.layout().head_w + 5};
    for (Eigen::Index k : probes) {
        if (std::abs(grad[k]) < 1e-8) continue;
        const double base = network_forward(p, map, x);
        p.flat()[k] += delta;
        const double moved = network_forward(p, map, x);
        p.flat()[k] -= delta;
        EXPECT_LT(std::abs((moved - base) / delta - grad[k]) / std::abs(grad[k]), 1e-3) << k;
    }
}

TEST(Forward, InvariantUnderHiddenUnitPermutation)
{
    const Architecture arch{4, 12, 3};
    const NetParams p = init_network(arch, 3);
    NetParams q = p;
    std::vector<int> perm(arch.width);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937(4));
    for (int b = 0; b < arch.n_blocks; ++b)
        for (int r = 0; r < arch.width; ++r) {
            q.w1(b).row(r) = p.w1(b).row(perm[r]);
            q.b1(b)[r] = p.b1(b)[perm[r]];
            q.w2(b).col(r) = p.w2(b).col(perm[r]);
        }
    const auto map = identity_features(4);
    const Eigen::Vector4d x(0.2, -0.5, 0.9, 0.1);
    EXPECT_NEAR(network_forward(p, map, x), network_forward(q, map, x), 1e-12);
}

TEST(Forward, ArchitecturalPeriodicity)
{
    for (int d = 1; d <= 3; ++d) {
        const auto map = build_feature_map(FeatureKind::separable, d, std::vector<double>(d, 1.0), 3, {}, {}, 0, false);
        const NetParams p = init_network({map.output_dim(), 32, 3}, 100 + d);
        const auto pts = sobol_batch(20, d, 7, Box::unit(d));
        std::mt19937_64 rng(d);
        std::uniform_real_distribution<double> jitter(0.0, 1e-3);
        for (Eigen::Index i = 0; i < pts.size(); ++i)
            for (int j = 0; j < d; ++j) {
                Eigen::VectorXd x = pts.points.col(i);
                x[0] += jitter(rng); // non-dyadic point
                Eigen::VectorXd y = x;
                y[j] += 1.0;
                EXPECT_LE(std::abs(network_forward(p, map, x) - network_forward(p, map, y)), 1e-12);
            }
    }
}
