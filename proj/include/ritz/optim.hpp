#ifndef RITZ_OPTIM_HPP
#define RITZ_OPTIM_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ritz/error.hpp"

namespace ritz {

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;

    static AdamState fresh(Eigen::Index n, double beta1 = 0.9, double beta2 = 0.999, double eps_hat = 1e-8)
    {
        require(n >= 0, "adam: negative parameter count");
        require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "adam: betas must lie in [0, 1)");
        require(eps_hat > 0.0, "adam: eps_hat must be > 0");
        return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0, beta1, beta2, eps_hat};
    }
};

/// One bias-corrected Adam update of params in place.
inline void adam_step(AdamState& st, Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad,
                      double lr)
{
    require(params.size() == grad.size() && st.m.size() == grad.size() && st.v.size() == grad.size(),
            "adam: length mismatch");
    if (!grad.allFinite()) throw DivergedError("gradient");
    ++st.t;
    st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
    st.v = st.beta2 * st.v + (1.0 - st.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    params.array() -= lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + st.eps_hat);
}

struct LbfgsConfig {
    int memory = 10;
    int max_iters = 500;
    double grad_tol = 1e-8;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_line_evals = 25;
    long max_evals = 0; // objective evaluations over the whole run; 0 = unlimited

    void validate() const
    {
        require(memory >= 1, "lbfgs: memory must be >= 1");
        require(max_iters >= 0, "lbfgs: max_iters must be >= 0");
        require(grad_tol >= 0.0, "lbfgs: grad_tol must be >= 0");
        require(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0, "lbfgs: need 0 < c1 < c2 < 1");
        require(max_line_evals >= 1, "lbfgs: max_line_evals must be >= 1");
    }
};

enum class LbfgsStop { gradient, max_iters, max_evals, line_search };

inline std::string to_string(LbfgsStop s)
{
    switch (s) {
    case LbfgsStop::gradient: return "gradient";
    case LbfgsStop::max_iters: return "max_iters";
    case LbfgsStop::max_evals: return "max_evals";
    case LbfgsStop::line_search: return "line_search";
    }
    return "?";
}

struct LbfgsResult {
    Eigen::VectorXd params;
    double value = 0.0;
    double initial_value = 0.0;
    int iterations = 0;
    long evaluations = 0;
    LbfgsStop stop = LbfgsStop::gradient;
    bool warning = false; // line search failed; params are the best point seen
    std::vector<double> trace; // value after each accepted iteration
};

/// Objective returns (value, gradient) at a parameter vector.
using Objective = std::function<std::pair<double, Eigen::VectorXd>(const Eigen::VectorXd&)>;

namespace detail {

// Minimizer of the cubic through (a, fa, ga), (b, fb, gb), or NaN if it has none.
inline double cubic_min(double a, double fa, double ga, double b, double fb, double gb)
{
    const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - ga * gb;
    if (disc < 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    return b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
}

struct LinePoint {
    double alpha;
    double f;
    double g; // directional derivative
    Eigen::VectorXd grad;
};

} // namespace detail

/**
 * L-BFGS with the two-loop recursion and a strong-Wolfe line search.
 * Accepted steps never increase the objective; on line-search failure the
 * best point seen is returned with warning set.
 */
inline LbfgsResult lbfgs_refine(const Objective& objective, const Eigen::VectorXd& x0, const LbfgsConfig& cfg = {})
{
    cfg.validate();
    LbfgsResult res;
    res.params = x0;
    auto [f, g] = objective(x0);
    res.evaluations = 1;
    require(std::isfinite(f) && g.allFinite(), "lbfgs: initial value is not finite");
    res.value = res.initial_value = f;

    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs; // (s, y)
    std::deque<double> rho;
    Eigen::VectorXd x = x0;
    Eigen::VectorXd d(x.size());
    Eigen::VectorXd q(x.size());
    std::vector<double> a(static_cast<std::size_t>(cfg.memory));

    auto budget_left = [&] { return cfg.max_evals <= 0 || res.evaluations < cfg.max_evals; };

    for (;;) {
        if (g.lpNorm<Eigen::Infinity>() < cfg.grad_tol) {
            res.stop = LbfgsStop::gradient;
            break;
        }
        if (res.iterations >= cfg.max_iters) {
            res.stop = LbfgsStop::max_iters;
            break;
        }
        if (!budget_left()) {
            res.stop = LbfgsStop::max_evals;
            break;
        }

        // Two-loop recursion.
        q = g;
        for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
            a[i] = rho[i] * pairs[i].first.dot(q);
            q -= a[i] * pairs[i].second;
        }
        double alpha0 = 1.0;
        if (pairs.empty()) {
            alpha0 = std::min(1.0, 1.0 / g.lpNorm<Eigen::Infinity>());
        } else {
            const auto& [s, y] = pairs.back();
            q *= s.dot(y) / y.squaredNorm();
        }
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const double b = rho[i] * pairs[i].second.dot(q);
            q += (a[i] - b) * pairs[i].first;
        }
        d = -q;
        double g0 = g.dot(d);
        if (!(g0 < 0.0)) {
            pairs.clear();
            rho.clear();
            d = -g;
            g0 = -g.squaredNorm();
            alpha0 = std::min(1.0, 1.0 / g.lpNorm<Eigen::Infinity>());
        }

        // Strong-Wolfe line search (bracketing, then zoom).
        const double f0 = f;
        auto eval = [&](double alpha) {
            auto [fa, ga] = objective(x + alpha * d);
            ++res.evaluations;
            if (!std::isfinite(fa) || !ga.allFinite()) fa = std::numeric_limits<double>::infinity();
            const double dg = std::isfinite(fa) ? ga.dot(d) : std::numeric_limits<double>::quiet_NaN();
            return detail::LinePoint{alpha, fa, dg, std::move(ga)};
        };
        auto sufficient = [&](const detail::LinePoint& p) { return p.f <= f0 + cfg.wolfe_c1 * p.alpha * g0; };
        auto curvature = [&](const detail::LinePoint& p) { return std::abs(p.g) <= -cfg.wolfe_c2 * g0; };

        std::optional<detail::LinePoint> accepted;
        std::optional<detail::LinePoint> best; // lowest value seen below f0
        auto note = [&](const detail::LinePoint& p) {
            if (p.f < f0 && (!best || p.f < best->f)) best = p;
        };

        detail::LinePoint prev{0.0, f0, g0, g};
        double alpha = alpha0;
        int evals = 0;
        std::optional<std::pair<detail::LinePoint, detail::LinePoint>> bracket; // (lo, hi)
        while (!accepted && !bracket && evals < cfg.max_line_evals && budget_left()) {
            detail::LinePoint cur = eval(alpha);
            ++evals;
            note(cur);
            if (!sufficient(cur) || (evals > 1 && cur.f >= prev.f)) {
                bracket.emplace(prev, std::move(cur));
            } else if (curvature(cur)) {
                accepted = std::move(cur);
            } else if (cur.g >= 0.0) {
                bracket.emplace(std::move(cur), prev);
            } else {
                prev = std::move(cur);
                alpha *= 2.0;
            }
        }
        while (!accepted && bracket && evals < cfg.max_line_evals && budget_left()) {
            auto& [lo, hi] = *bracket;
            const double span = hi.alpha - lo.alpha;
            double trial = std::isfinite(hi.f) ? detail::cubic_min(lo.alpha, lo.f, lo.g, hi.alpha, hi.f, hi.g)
                                               : std::numeric_limits<double>::quiet_NaN();
            const double a_min = std::min(lo.alpha, hi.alpha) + 0.1 * std::abs(span);
            const double a_max = std::max(lo.alpha, hi.alpha) - 0.1 * std::abs(span);
            if (!std::isfinite(trial) || trial < a_min || trial > a_max) trial = lo.alpha + 0.5 * span;
            detail::LinePoint cur = eval(trial);
            ++evals;
            note(cur);
            if (!sufficient(cur) || cur.f >= lo.f) {
                hi = std::move(cur);
            } else if (curvature(cur)) {
                accepted = std::move(cur);
            } else {
                if (cur.g * span >= 0.0) hi = lo;
                lo = std::move(cur);
            }
            if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
        }

        if (!accepted) {
            if (best) {
                x += best->alpha * d;
                f = best->f;
                g = std::move(best->grad);
                ++res.iterations;
                res.trace.push_back(f);
            }
            res.stop = budget_left() ? LbfgsStop::line_search : LbfgsStop::max_evals;
            res.warning = res.stop == LbfgsStop::line_search;
            break;
        }

        Eigen::VectorXd s = accepted->alpha * d;
        Eigen::VectorXd y = accepted->grad - g;
        x += s;
        f = accepted->f;
        g = std::move(accepted->grad);
        ++res.iterations;
        res.trace.push_back(f);

        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            if (static_cast<int>(pairs.size()) == cfg.memory) {
                pairs.pop_front();
                rho.pop_front();
            }
            rho.push_back(1.0 / sy);
            pairs.emplace_back(std::move(s), std::move(y));
        }
    }

    res.params = std::move(x);
    res.value = f;
    return res;
}

} // namespace ritz

#endif // RITZ_OPTIM_HPP
