#include <gtest/gtest.h>

#include <random>

#include "ritz/diffkernel.hpp"

using namespace ritz;

namespace {

PointBatch single_point(std::initializer_list<double> coords)
{
    PointBatch b;
    b.points.resize(static_cast<Eigen::Index>(coords.size()), 1);
    int j = 0;
    for (double c : coords) b.points(j++, 0) = c;
    b.domain = Box::unit(static_cast<int>(coords.size()));
    return b;
}

// Central difference of u along each axis at every point.
Eigen::MatrixXd spatial_fd(const NetParams& p, const FeatureMap& map, const PointBatch& batch, double h)
{
    Eigen::MatrixXd fd(batch.dim(), batch.size());
    for (int j = 0; j < batch.dim(); ++j) {
        PointBatch plus = batch, minus = batch;
        plus.points.row(j).array() += h;
        minus.points.row(j).array() -= h;
        fd.row(j) = (eval_batch(p, map, plus, false).values - eval_batch(p, map, minus, false).values).transpose()
                    / (2.0 * h);
    }
    return fd;
}

} // namespace

TEST(EvalBatch, LinearBypass)
{
    NetParams p({2, 8, 2});
    p.beta1() = 1.0;
    p.beta2() = 1.0;
    p.w() << 2.0, 3.0;
    const auto res = eval_batch(p, identity_features(2), single_point({1.0, 1.0}));
    EXPECT_EQ(res.values[0], 6.0);
    EXPECT_EQ(res.spatial_grads(0, 0), 2.0);
    EXPECT_EQ(res.spatial_grads(1, 0), 3.0);
}

TEST(EvalBatch, ConstantNetworkHasZeroGradient)
{
    NetParams p({3, 8, 2});
    p.beta2() = 0.7;
    const auto batch = sobol_batch(300, 3, 1, Box::unit(3));
    const auto res = eval_batch(p, identity_features(3), batch);
    EXPECT_TRUE((res.values.array() == 0.7).all());
    EXPECT_TRUE(res.spatial_grads.isZero(0.0));
}

TEST(EvalBatch, SpatialGradientMatchesFiniteDifference1D)
{
    const NetParams p = init_network({1, 16, 3}, 21);
    const auto map = identity_features(1);
    const auto batch = single_point({0.3});
    const auto res = eval_batch(p, map, batch);
    const double fd = spatial_fd(p, map, batch, 1e-5)(0, 0);
    EXPECT_LT(std::abs(res.spatial_grads(0, 0) - fd) / std::max(1.0, std::abs(fd)), 1e-5);
}

TEST(EvalBatch, SpatialGradientPropertyAwayFromKinks)
{
    // Points whose pre-activations all sit more than 1e-3 away from zero.
    for (int d = 1; d <= 3; ++d) {
        const auto map = build_feature_map(FeatureKind::separable, d, std::vector<double>(d, 1.0), 2, {}, {}, 0);
        const NetParams p = init_network({map.output_dim(), 24, 3}, 40 + d);
        const auto pts = sobol_batch(200, d, 1, Box::unit(d));
        int checked = 0;
        for (Eigen::Index i = 0; i < pts.size(); ++i) {
            PointBatch one;
            one.points = pts.points.col(i);
            one.domain = pts.domain;
            Tape tape;
            tape.forward(p, map, one.points, true);
            if (tape.min_abs_preactivation() <= 1e-3) continue;
            const auto res = eval_batch(p, map, one);
            const Eigen::MatrixXd fd = spatial_fd(p, map, one, 1e-6);
            for (int j = 0; j < d; ++j)
                EXPECT_LT(std::abs(res.spatial_grads(j, 0) - fd(j, 0)) / std::max(1.0, std::abs(fd(j, 0))), 1e-5);
            ++checked;
        }
        EXPECT_GT(checked, 20);
    }
}

TEST(EvalBatch, ChunkingDoesNotChangeValues)
{
    const auto map = build_feature_map(FeatureKind::separable, 2, {1.0, 1.0}, 3, {}, {}, 0);
    const NetParams p = init_network({map.output_dim(), 16, 2}, 3);
    const auto big = sobol_batch(kernel_chunk * 2 + 17, 2, 1, Box::unit(2));
    const auto res = eval_batch(p, map, big);
    for (Eigen::Index i : {Eigen::Index{0}, kernel_chunk - 1, kernel_chunk, 2 * kernel_chunk + 16}) {
        PointBatch one;
        one.points = big.points.col(i);
        one.domain = big.domain;
        const auto r1 = eval_batch(p, map, one);
        EXPECT_NEAR(r1.values[0], res.values[i], 1e-13);
        EXPECT_NEAR((r1.spatial_grads.col(0) - res.spatial_grads.col(i)).norm(), 0.0, 1e-12);
    }
}

TEST(EvalBatch, DimensionMismatchIsConfigError)
{
    const auto map = build_feature_map(FeatureKind::separable, 2, {1.0, 1.0}, 1, {}, {}, 0);
    const NetParams p = init_network({map.output_dim(), 8, 1}, 1);
    EXPECT_THROW(eval_batch(p, map, sobol_batch(4, 3, 1, Box::unit(3))), ConfigError);
    const NetParams q = init_network({3, 8, 1}, 1);
    EXPECT_THROW(eval_batch(q, map, sobol_batch(4, 2, 1, Box::unit(2))), ConfigError);
}

TEST(LossGradient, ConstantFieldBiasGradient)
{
    const double c = 0.6;
    const Box box{{0.0}, {2.0}};
    NetParams p({1, 8, 2});
    p.beta2() = c;
    const LossSpec spec{0.04, 0.6, 0.0, box.volume()};
    const BatchSet batches{sobol_batch(64, 1, 1, box), sobol_batch(64, 1, 65, box), std::nullopt};
    const auto [br, g] = loss_gradient(spec, ALState{0.0, 0.0, 1.0, 1.2, 0}, p, identity_features(1), batches);
    EXPECT_NEAR(g.entries[p.layout().beta2], (c * c * c - c) * box.volume(), 1e-13);
    EXPECT_NEAR(br.energy, 0.25 * (c * c - 1) * (c * c - 1) * box.volume(), 1e-14);
}

TEST(LossGradient, DisabledConstraintContributesNothing)
{
    const auto map = build_feature_map(FeatureKind::separable, 1, {1.0}, 3, {}, {}, 0);
    const NetParams p = init_network({map.output_dim(), 16, 2}, 9);
    const auto e = sobol_batch(64, 1, 1, Box::unit(1));
    const BatchSet a{e, sobol_batch(64, 1, 100, Box::unit(1)), std::nullopt};
    const BatchSet b{e, sobol_batch(32, 1, 500, Box::unit(1)), std::nullopt};
    const ALState off{0.0, 0.0, 1.0, 1.2, 0};
    const auto ra = loss_gradient({0.04, 0.6, 0.0, 1.0}, off, p, map, a);
    const auto rb = loss_gradient({0.04, -0.3, 0.0, 1.0}, off, p, map, b);
    EXPECT_EQ(ra.first.mass, 0.0);
    EXPECT_EQ(ra.second.entries, rb.second.entries);
}

TEST(LossGradient, ZeroAtDoubleWellMinimum)
{
    for (double s : {1.0, -1.0}) {
        NetParams p = init_network({5, 16, 3}, 2);
        p.head_w().setZero();
        p.w().setZero();
        p.head_b() = 0.0;
        p.beta2() = s;
        const auto batch = sobol_batch(100, 5, 1, Box::unit(5));
        const BatchSet batches{batch, batch, std::nullopt};
        const auto [br, g] =
            loss_gradient({0.04, s, 0.0, 1.0}, ALState{0.0, 0.0, 1.0, 1.2, 0}, p, identity_features(5), batches);
        EXPECT_EQ(br.energy, 0.0);
        EXPECT_TRUE(g.entries.isZero(0.0));
    }
}

TEST(LossGradient, FullGradientMatchesFiniteDifferences1D)
{
    const auto map = build_feature_map(FeatureKind::random, 1, {1.0}, {}, 16, 3.0, 4);
    const NetParams p = init_network({map.output_dim(), 100, 3}, 8);
    const auto batch = sobol_batch(64, 1, 1, Box::unit(1));
    GradcheckOptions opt;
    opt.subset = 200;
    opt.seed = 1;
    EXPECT_LT(gradcheck(p, map, batch, 1e-5, opt), 1e-4);
}

TEST(LossGradient, BoundaryPenaltyGradient)
{
    NetParams p = init_network({2, 24, 3}, 12);
    p.flat() *= 0.5; // keeps the loss O(1) so difference roundoff stays small
    const Box box = Box::unit(2);
    const LossSpec spec{0.05, 0.1, 10.0, 1.0};
    const BatchSet batches{sobol_batch(64, 2, 1, box), sobol_batch(64, 2, 65, box), make_boundary_pairs(box, 7)};
    const ALState al{0.3, 2.0, 5.0, 1.2, 0};
    GradcheckOptions opt;
    opt.spec = spec;
    opt.al = al;
    opt.subset = 128;
    opt.seed = 3;
    const auto st = gradcheck_stats(p, identity_features(2), batches, 1e-5, opt);
    EXPECT_EQ(st.checked, 128u);
    EXPECT_LT(st.max_error, 1e-4);
    const auto [br, g] = loss_gradient(spec, al, p, identity_features(2), batches);
    EXPECT_NEAR(br.boundary, boundary_penalty(p, identity_features(2), *batches.boundary), 1e-15);
    EXPECT_NEAR(br.total, br.energy + br.mass + spec.alpha * br.boundary, 1e-15);
}

TEST(LossGradient, Deterministic)
{
    const auto map = build_feature_map(FeatureKind::separable, 2, {1.0, 1.0}, 3, {}, {}, 0);
    const NetParams p = init_network({map.output_dim(), 32, 3}, 5);
    const BatchSet batches{sobol_batch(700, 2, 1, Box::unit(2)), sobol_batch(700, 2, 701, Box::unit(2)),
                           std::nullopt};
    const ALState al{0.2, 1.5, 2.0, 1.2, 0};
    const auto a = loss_gradient({0.01, 0.02, 0.0, 1.0}, al, p, map, batches);
    const auto b = loss_gradient({0.01, 0.02, 0.0, 1.0}, al, p, map, batches);
    EXPECT_EQ(a.first.total, b.first.total);
    EXPECT_EQ(a.second.entries, b.second.entries);
    const LossBreakdown e = evaluate_loss({0.01, 0.02, 0.0, 1.0}, al, p, map, batches);
    EXPECT_NEAR(e.total, a.first.total, 1e-13);
}

TEST(LossGradient, NonFiniteParametersReportTerm)
{
    NetParams p = init_network({1, 8, 2}, 1);
    p.beta2() = std::numeric_limits<double>::quiet_NaN();
    const auto batch = sobol_batch(8, 1, 1, Box::unit(1));
    try {
        loss_gradient({0.04, 0.6, 0.0, 1.0}, ALState{}, p, identity_features(1), {batch, batch, std::nullopt});
        FAIL() << "expected DivergedError";
    } catch (const DivergedError& e) {
        EXPECT_EQ(e.term(), "energy");
    }
}

TEST(Gradcheck, QuadraticToy)
{
    auto quad = [](const Eigen::VectorXd& x) { return std::pair<double, Eigen::VectorXd>{0.5 * x.squaredNorm(), x}; };
    Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(50, -3.0, 4.0);
    EXPECT_LT(gradcheck(quad, theta, 1e-4, 40, 0), 1e-9);
}

TEST(Gradcheck, LargeStepIsDetected)
{
    const auto map = build_feature_map(FeatureKind::separable, 1, {1.0}, 3, {}, {}, 0);
    const NetParams p = init_network({map.output_dim(), 32, 3}, 19);
    const auto batch = sobol_batch(64, 1, 1, Box::unit(1));
    GradcheckOptions opt;
    opt.subset = 64;
    const double fine = gradcheck(p, map, batch, 1e-5, opt);
    opt.kink_margin = 0.0; // nearly every 0.1 step crosses a kink
    const double coarse = gradcheck(p, map, batch, 1e-1, opt);
    EXPECT_LT(fine, 1e-4);
    EXPECT_GT(coarse, fine);
}

TEST(Gradcheck, SeparableFeaturesAllDimensions)
{
    for (int d = 1; d <= 3; ++d) {
        const auto map = build_feature_map(FeatureKind::separable, d, std::vector<double>(d, 1.0), 3, {}, {}, 0);
        const NetParams p = init_network({map.output_dim(), 100, 3}, 1000 + d);
        const auto batch = sobol_batch(64, d, 1, Box::unit(d));
        GradcheckOptions opt;
        opt.seed = d;
        EXPECT_LT(gradcheck(p, map, batch, 1e-5, opt), 1e-4) << "d=" << d;
    }
}
