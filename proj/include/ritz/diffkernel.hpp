#ifndef RITZ_DIFFKERNEL_HPP
#define RITZ_DIFFKERNEL_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "ritz/loss.hpp"
#include "ritz/tape.hpp"

namespace ritz {

/// Quadrature batches for one loss evaluation.
struct BatchSet {
    PointBatch energy;
    PointBatch mass;
    std::optional<BoundaryPairs> boundary;
};

namespace detail {

inline void check_finite(double v, const char* term)
{
    if (!std::isfinite(v)) throw DivergedError(term);
}

// Sum over chunks of per-chunk partial sums and gradients, reduced in chunk order.
template <class ChunkFn>
double chunked_reduce(const NetParams& params, const FeatureMap& map, const PointBatch& batch, bool tangents,
                      ChunkFn&& seed_fn, Eigen::VectorXd& grad)
{
    const Eigen::Index n = batch.size();
    const int chunks = chunk_count(n);
    const int workers = std::min(thread_count(), std::max(chunks, 1));
    std::vector<Tape> tapes(workers);
    std::vector<Eigen::VectorXd> grads(chunks);
    std::vector<double> partial(chunks, 0.0);
    parallel_for(chunks, [&](int c, int worker) {
        const Eigen::Index begin = c * kernel_chunk;
        const Eigen::Index len = std::min(kernel_chunk, n - begin);
        Tape& tape = tapes[worker];
        tape.forward(params, map, batch.points.middleCols(begin, len), tangents);
        Eigen::RowVectorXd seed(tape.output().size());
        partial[c] = seed_fn(tape.output(), len, seed);
        grads[c] = Eigen::VectorXd::Zero(params.size());
        tape.backward(params, seed, grads[c]);
    });
    double sum = 0.0;
    for (int c = 0; c < chunks; ++c) {
        sum += partial[c];
        grad += grads[c];
    }
    return sum;
}

} // namespace detail

/**
 * L_total = energy + lambda c + (mu/2) c^2 + alpha * boundary and its exact
 * gradient with respect to every network parameter.
 *
 * The mass term is linear in sum(u), so its gradient is a single pass with
 * unit seeds scaled afterwards by (lambda + mu c) |Omega| / N.
 */
inline std::pair<LossBreakdown, ParamGradient> loss_gradient(const LossSpec& spec, const ALState& al,
                                                             const NetParams& params, const FeatureMap& map,
                                                             const BatchSet& batches)
{
    spec.validate();
    check_shapes(params, map, batches.energy.dim());
    require(batches.energy.size() > 0 && batches.mass.size() > 0, "loss_gradient: empty batch");
    require(batches.mass.dim() == batches.energy.dim(), "loss_gradient: mass batch dimension mismatch");

    const int d = batches.energy.dim();
    const double eps2 = spec.epsilon * spec.epsilon;

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());

    const double energy_scale = spec.volume / static_cast<double>(batches.energy.size());
    const double energy_sum = detail::chunked_reduce(
        params, map, batches.energy, true,
        [&](const Eigen::RowVectorXd& out, Eigen::Index n, Eigen::RowVectorXd& seed) {
            double sum = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double u = out[i];
                double g2 = 0.0;
                for (int j = 1; j <= d; ++j) {
                    const double g = out[j * n + i];
                    g2 += g * g;
                    seed[j * n + i] = energy_scale * eps2 * g;
                }
                sum += energy_density(u, g2, spec.epsilon);
                seed[i] = energy_scale * (u * u * u - u);
            }
            return sum;
        },
        grad);
    const double energy = energy_scale * energy_sum;
    detail::check_finite(energy, "energy");

    Eigen::VectorXd mass_dir = Eigen::VectorXd::Zero(params.size());
    const double u_sum = detail::chunked_reduce(
        params, map, batches.mass, false,
        [](const Eigen::RowVectorXd& out, Eigen::Index n, Eigen::RowVectorXd& seed) {
            seed.setOnes();
            return out.head(n).sum();
        },
        mass_dir);
    const double mass_scale = spec.volume / static_cast<double>(batches.mass.size());
    const double mean_u = mass_scale * u_sum;
    const double c = mean_u - spec.m0;
    const double mass = augmented_lagrange_term(mean_u, spec, al);
    detail::check_finite(mass, "mass");
    grad += ((al.lambda + al.mu * c) * mass_scale) * mass_dir;

    double boundary = 0.0;
    if (batches.boundary && spec.alpha != 0.0) {
        const BoundaryPairs& pairs = *batches.boundary;
        require(!map.integer_frequencies(), "boundary penalty is redundant with an integer-frequency feature map");
        Tape lower;
        Tape upper;
        for (std::size_t j = 0; j < pairs.axes(); ++j) {
            lower.forward(params, map, pairs.lower[j].points, false);
            upper.forward(params, map, pairs.upper[j].points, false);
            const Eigen::RowVectorXd diff = lower.output() - upper.output();
            const double k = static_cast<double>(diff.size());
            boundary += diff.squaredNorm() / k;
            const Eigen::RowVectorXd seed = (2.0 * spec.alpha / k) * diff;
            lower.backward(params, seed, grad);
            upper.backward(params, -seed, grad);
        }
        detail::check_finite(boundary, "boundary");
    }

    LossBreakdown br = assemble_total(energy, mass, boundary, spec.alpha, mean_u, c);
    detail::check_finite(br.total, "total");
    if (!grad.allFinite()) throw DivergedError("gradient");
    return {br, ParamGradient{std::move(grad)}};
}

/// Loss breakdown without the gradient (value-only mass pass, tangents for energy).
inline LossBreakdown evaluate_loss(const LossSpec& spec, const ALState& al, const NetParams& params,
                                   const FeatureMap& map, const BatchSet& batches)
{
    const EvalResult e = eval_batch(params, map, batches.energy, true);
    const EvalResult m = eval_batch(params, map, batches.mass, false);
    const double energy = energy_term(e, spec);
    const double mean_u = mean_field(m, spec);
    const double boundary =
        (batches.boundary && spec.alpha != 0.0) ? boundary_penalty(params, map, *batches.boundary) : 0.0;
    return assemble_total(energy, augmented_lagrange_term(mean_u, spec, al), boundary, spec.alpha, mean_u,
                          mean_u - spec.m0);
}

struct GradcheckStats {
    double max_error = 0.0;
    std::size_t checked = 0;
    std::size_t rejected = 0; // probes refused by the admissibility test
};

/**
 * Max over a random subset of coordinates of
 * |analytic - central difference| / max(1, |analytic|).
 * Objective: theta -> (value, gradient). admissible(theta_minus, theta_plus)
 * may refuse a stencil, in which case the next coordinate in the shuffled
 * order is tried. max_error is +inf on a non-finite probe.
 */
template <class Objective, class Admissible>
GradcheckStats gradcheck_stats(Objective&& objective, const Eigen::VectorXd& theta, double h, std::size_t subset,
                               std::uint64_t seed, Admissible&& admissible)
{
    require(h > 0.0, "gradcheck: h must be > 0");
    GradcheckStats st;
    const auto [value, analytic] = objective(theta);
    if (!std::isfinite(value) || analytic.size() != theta.size()) {
        st.max_error = std::numeric_limits<double>::infinity();
        return st;
    }

    std::vector<Eigen::Index> idx(static_cast<std::size_t>(theta.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    Eigen::VectorXd plus = theta;
    Eigen::VectorXd minus = theta;
    for (Eigen::Index k : idx) {
        if (st.checked == subset) break;
        plus[k] = theta[k] + h;
        minus[k] = theta[k] - h;
        if (admissible(minus, plus)) {
            const double fp = objective(plus).first;
            const double fm = objective(minus).first;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                st.max_error = std::numeric_limits<double>::infinity();
                return st;
            }
            const double fd = (fp - fm) / (2.0 * h);
            st.max_error = std::max(st.max_error, std::abs(analytic[k] - fd) / std::max(1.0, std::abs(analytic[k])));
            ++st.checked;
        } else {
            ++st.rejected;
        }
        plus[k] = theta[k];
        minus[k] = theta[k];
    }
    return st;
}

template <class Objective>
double gradcheck(Objective&& objective, const Eigen::VectorXd& theta, double h, std::size_t subset,
                 std::uint64_t seed)
{
    return gradcheck_stats(std::forward<Objective>(objective), theta, h, subset, seed,
                           [](const Eigen::VectorXd&, const Eigen::VectorXd&) { return true; })
        .max_error;
}

struct GradcheckOptions {
    LossSpec spec{0.04, 0.1, 0.0, 1.0};
    ALState al{0.5, 2.0, 10.0, 1.2, 0};
    std::size_t subset = 64;
    std::uint64_t seed = 0;
    double kink_margin = 30.0; // <= 0 disables the kink guard
};

/**
 * Gradient check of the full loss over a batch set. The loss is only C1
 * where an activation input is near 0 (act'' ~ z^-1/2), so a probe is
 * skipped unless every activation input z, on every batch, stays on its
 * side of 0 with |z| >= kink_margin * |dz| over the stencil.
 */
inline GradcheckStats gradcheck_stats(const NetParams& params, const FeatureMap& map, const BatchSet& batches,
                                      double h, const GradcheckOptions& opt = {})
{
    auto objective = [&](const Eigen::VectorXd& theta) {
        const NetParams p(params.arch(), theta);
        try {
            auto [br, g] = loss_gradient(opt.spec, opt.al, p, map, batches);
            return std::pair<double, Eigen::VectorXd>{br.total, std::move(g.entries)};
        } catch (const DivergedError&) {
            return std::pair<double, Eigen::VectorXd>{std::numeric_limits<double>::quiet_NaN(), Eigen::VectorXd{}};
        }
    };
    if (opt.kink_margin <= 0.0)
        return gradcheck_stats(objective, params.flat(), h, opt.subset, opt.seed,
                               [](const Eigen::VectorXd&, const Eigen::VectorXd&) { return true; });

    std::vector<const PointBatch*> all{&batches.energy, &batches.mass};
    if (batches.boundary)
        for (std::size_t j = 0; j < batches.boundary->lower.size(); ++j) {
            all.push_back(&batches.boundary->lower[j]);
            all.push_back(&batches.boundary->upper[j]);
        }
    auto inputs = [&](const NetParams& p) {
        std::vector<double> z;
        for (const PointBatch* b : all) {
            const std::vector<double> part = activation_inputs(p, map, *b);
            z.insert(z.end(), part.begin(), part.end());
        }
        return z;
    };
    const std::vector<double> z0 = inputs(params);
    auto smooth = [&](const Eigen::VectorXd& minus, const Eigen::VectorXd& plus) {
        for (const Eigen::VectorXd* theta : {&minus, &plus}) {
            const std::vector<double> z = inputs(NetParams(params.arch(), *theta));
            for (std::size_t i = 0; i < z.size(); ++i) {
                const double dz = std::abs(z[i] - z0[i]);
                if (dz == 0.0) continue;
                if ((z[i] > 0.0) != (z0[i] > 0.0)) return false;
                if (std::min(std::abs(z[i]), std::abs(z0[i])) < opt.kink_margin * dz) return false;
            }
        }
        return true;
    };
    return gradcheck_stats(objective, params.flat(), h, opt.subset, opt.seed, smooth);
}

/// Gradient check with one batch serving as both the energy and the mass batch.
inline double gradcheck(const NetParams& params, const FeatureMap& map, const PointBatch& batch, double h,
                        const GradcheckOptions& opt = {})
{
    return gradcheck_stats(params, map, BatchSet{batch, batch, std::nullopt}, h, opt).max_error;
}

} // namespace ritz

#endif // RITZ_DIFFKERNEL_HPP
