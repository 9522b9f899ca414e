#ifndef RITZ_DRIVER_HPP
#define RITZ_DRIVER_HPP

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ritz/augmented_lagrangian.hpp"
#include "ritz/diffkernel.hpp"
#include "ritz/error.hpp"
#include "ritz/features.hpp"
#include "ritz/loss.hpp"
#include "ritz/network.hpp"
#include "ritz/optim.hpp"
#include "ritz/oracle.hpp"
#include "ritz/sampling.hpp"

namespace ritz {

enum class Mode { penalty, ffm };
enum class Sampler { sobol, grid };

inline std::string to_string(Mode m) { return m == Mode::penalty ? "penalty" : "ffm"; }
inline std::string to_string(Sampler s) { return s == Sampler::sobol ? "sobol" : "grid"; }

inline Mode parse_mode(const std::string& s)
{
    if (s == "penalty") return Mode::penalty;
    if (s == "ffm") return Mode::ffm;
    throw ConfigError("unknown mode '" + s + "' (expected penalty or ffm)");
}

inline Sampler parse_sampler(const std::string& s)
{
    if (s == "sobol") return Sampler::sobol;
    if (s == "grid") return Sampler::grid;
    throw ConfigError("unknown sampler '" + s + "' (expected sobol or grid)");
}

struct RunConfig {
    // problem
    int dim = 1;
    std::vector<double> lengths{1.0};
    double epsilon = 0.04;
    double m0 = 0.0;
    Mode mode = Mode::ffm;

    // features
    FeatureKind feature_kind = FeatureKind::none;
    std::optional<int> max_freq;
    std::optional<int> rff_modes;
    std::optional<double> rff_scale;
    bool wrap_inputs = true;

    // network
    int width = 100;
    int blocks = 3;

    // training
    int outer = 1;
    int inner = 100;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    // constraint
    ALState al{};
    double alpha = 0.0;
    double tolerance = 1e-3; // |constraint| at completion for a converged run

    // sampling
    Sampler energy_sampler = Sampler::sobol;
    long energy_points = 1024; // per axis for the grid sampler
    bool grid_right_edge = false;
    long mass_points = 0;      // 0: same count as the energy batch
    long mass_skip = 0;        // 0: first Sobol index after the energy batch
    bool redraw = false;
    int boundary_points = 32;  // per remaining axis on each face pair; penalty mode only

    // refinement
    bool lbfgs_enabled = true;
    LbfgsConfig lbfgs{};

    // output
    int snapshot_resolution = 0; // 0: 256, 128 or 64 points per axis for d = 1, 2, 3
    int snapshot_interval = 0;   // 0: once per outer cycle

    Box domain() const
    {
        return Box{std::vector<double>(static_cast<std::size_t>(dim), 0.0), lengths};
    }

    int resolution() const
    {
        if (snapshot_resolution > 0) return snapshot_resolution;
        return dim == 1 ? 256 : dim == 2 ? 128 : 64;
    }

    int interval() const { return snapshot_interval > 0 ? snapshot_interval : inner; }

    double volume() const
    {
        double v = 1.0;
        for (double l : lengths) v *= l;
        return v;
    }

    LossSpec loss_spec() const { return LossSpec{epsilon, m0, alpha, volume()}; }

    void validate() const
    {
        require(dim >= 1 && dim <= 3, "problem.dim must be 1, 2 or 3");
        require(static_cast<int>(lengths.size()) == dim, "problem.length needs one entry per dimension");
        domain().validate();
        require(epsilon > 0.0, "problem.epsilon must be > 0");
        require(outer >= 1, "training.outer must be >= 1");
        require(inner >= 0, "training.inner must be >= 0");
        require(lr >= 0.0, "training.lr must be >= 0");
        require(al.mu > 0.0 && al.mu <= al.mu_max, "constraint: need 0 < mu0 <= mu_max");
        require(al.rho > 1.0, "constraint.rho must be > 1");
        require(al.freeze_outer >= 0, "constraint.freeze_outer must be >= 0");
        require(alpha >= 0.0, "constraint.alpha must be >= 0");
        require(tolerance > 0.0, "constraint.tolerance must be > 0");
        require(energy_points >= (energy_sampler == Sampler::grid ? 2 : 1), "sampling.energy_points too small");
        require(mass_points >= 0 && mass_skip >= 0, "sampling: mass_points and mass_skip must be >= 0");
        require(energy_sampler == Sampler::sobol || !redraw, "sampling.redraw needs the sobol sampler");
        require(width >= 1 && blocks >= 1, "network: width and blocks must be >= 1");
        require(resolution() >= 4, "output.snapshot_resolution must be >= 4");
        require(snapshot_interval >= 0, "output.snapshot_interval must be >= 0");
        lbfgs.validate();
        if (mode == Mode::penalty) {
            require(feature_kind == FeatureKind::none || feature_kind == FeatureKind::random,
                    "penalty mode needs features.kind = none or random");
            require(boundary_points >= 1, "sampling.boundary_points must be >= 1");
        } else {
            require(feature_kind != FeatureKind::none, "ffm mode needs a Fourier feature map");
            require(alpha == 0.0, "ffm mode enforces periodicity through the features; set constraint.alpha = 0");
        }
    }
};

/// Field values on a uniform grid that excludes the right edge.
struct FieldSnapshot {
    std::vector<int> shape;
    Box domain;
    PointBatch grid;
    Eigen::VectorXd values;
    long epoch = 0;

    GridField as_grid_field() const { return GridField{shape, domain.periods(), values}; }
};

inline FieldSnapshot snapshot(const NetParams& params, const FeatureMap& map, const PointBatch& grid,
                              std::vector<int> shape, long epoch = 0)
{
    FieldSnapshot s{std::move(shape), grid.domain, grid, eval_batch(params, map, grid, false).values, epoch};
    return s;
}

inline FieldSnapshot snapshot(const NetParams& params, const FeatureMap& map, const Box& domain, int resolution,
                              long epoch = 0)
{
    const int d = domain.dim();
    return snapshot(params, map, grid_batch(resolution, d, domain, false), std::vector<int>(d, resolution), epoch);
}

/// (volume * mean over the grid of (a - b)^2)^(1/2).
inline double successive_error(const FieldSnapshot& a, const FieldSnapshot& b)
{
    require(a.shape == b.shape && a.grid.points.cols() == b.grid.points.cols()
                && a.grid.points.rows() == b.grid.points.rows() && a.grid.points == b.grid.points,
            "successive_error: snapshots are on different grids");
    require(a.values.size() == b.values.size() && a.values.size() > 0, "successive_error: value count mismatch");
    const double mean_sq = (a.values - b.values).squaredNorm() / static_cast<double>(a.values.size());
    return std::sqrt(a.domain.volume() * mean_sq);
}

struct LossRow {
    long epoch = 0;
    LossBreakdown loss;
    double lambda = 0.0;
    double mu = 0.0;
};

struct ErrorRow {
    long epoch = 0;
    double error = 0.0;
};

enum class RunStatus { converged, not_converged, diverged };

inline std::string to_string(RunStatus s)
{
    switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::not_converged: return "not_converged";
    case RunStatus::diverged: return "diverged";
    }
    return "?";
}

struct TrainResult {
    NetParams params;
    FeatureMap map;
    std::vector<LossRow> loss_history;   // one row per Adam epoch, loss before the step
    std::vector<ErrorRow> error_history; // one row per snapshot after the first
    std::vector<double> constraint_trace; // |c| on the mass batch after each outer cycle
    std::vector<double> refine_trace;     // total loss per accepted L-BFGS iteration
    std::optional<LbfgsStop> refine_stop;
    bool refine_warning = false;
    LossBreakdown final_loss;             // at the final parameters with the final multiplier state
    ALState final_al;
    FieldSnapshot final_snapshot;
    double wall_seconds = 0.0;
    RunStatus status = RunStatus::not_converged;
    std::string diverged_term;
};

/// Energy, mass and (in penalty mode) boundary batches for a configuration.
struct RunBatches {
    BatchSet set;
    long energy_count = 0;
};

inline PointBatch energy_batch(const RunConfig& cfg, long draw = 0)
{
    const Box box = cfg.domain();
    if (cfg.energy_sampler == Sampler::grid)
        return grid_batch(static_cast<int>(cfg.energy_points), cfg.dim, box, cfg.grid_right_edge);
    // Draw k takes the block after the mass batch for k >= 1.
    const long n = cfg.energy_points;
    const long mass_n = cfg.mass_points > 0 ? cfg.mass_points : n;
    const std::uint64_t skip = draw == 0 ? 1 : static_cast<std::uint64_t>(1 + n + mass_n + (draw - 1) * n);
    return sobol_batch(n, cfg.dim, skip, box);
}

inline RunBatches make_batches(const RunConfig& cfg)
{
    PointBatch energy = energy_batch(cfg);
    const long n = energy.size();
    const long mass_n = cfg.mass_points > 0 ? cfg.mass_points : n;
    const std::uint64_t skip = cfg.mass_skip > 0 ? static_cast<std::uint64_t>(cfg.mass_skip)
                               : cfg.energy_sampler == Sampler::sobol ? static_cast<std::uint64_t>(1 + n)
                                                                       : 1;
    PointBatch mass = sobol_batch(mass_n, cfg.dim, skip, cfg.domain());
    std::optional<BoundaryPairs> boundary;
    if (cfg.mode == Mode::penalty && cfg.alpha > 0.0) boundary = make_boundary_pairs(cfg.domain(), cfg.boundary_points);
    return RunBatches{BatchSet{std::move(energy), std::move(mass), std::move(boundary)}, n};
}

inline FeatureMap make_feature_map(const RunConfig& cfg)
{
    if (cfg.feature_kind == FeatureKind::none) return identity_features(cfg.dim);
    // Separate stream from the network initialisation.
    return build_feature_map(cfg.feature_kind, cfg.dim, cfg.lengths, cfg.max_freq, cfg.rff_modes, cfg.rff_scale,
                             cfg.seed ^ 0x9e3779b97f4a7c15ULL, cfg.wrap_inputs);
}

using ProgressFn = std::function<void(const LossRow&)>;

/**
 * Outer cycles of Adam epochs under the augmented Lagrangian, multiplier
 * updates between cycles, then L-BFGS on the fixed batch with the final
 * multiplier state.
 */
inline TrainResult train(const RunConfig& cfg, const ProgressFn& progress = {})
{
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const LossSpec spec = cfg.loss_spec();

    FeatureMap map = make_feature_map(cfg);
    NetParams params = init_network({map.output_dim(), cfg.width, cfg.blocks}, cfg.seed);
    RunBatches batches = make_batches(cfg);
    const BatchSet fixed = batches.set;

    TrainResult res;
    res.map = map;
    ALState al = cfg.al;
    AdamState adam = AdamState::fresh(params.size(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    const PointBatch grid = grid_batch(cfg.resolution(), cfg.dim, cfg.domain(), false);
    const std::vector<int> shape(cfg.dim, cfg.resolution());
    FieldSnapshot last = snapshot(params, map, grid, shape, 0);

    auto take_snapshot = [&](long epoch) {
        FieldSnapshot next = snapshot(params, map, grid, shape, epoch);
        res.error_history.push_back({epoch, successive_error(last, next)});
        last = std::move(next);
    };

    long epoch = 0;
    try {
        for (int k = 0; k < cfg.outer; ++k) {
            for (int t = 0; t < cfg.inner; ++t, ++epoch) {
                if (cfg.redraw && epoch > 0) batches.set.energy = energy_batch(cfg, epoch);
                auto [loss, grad] = loss_gradient(spec, al, params, map, batches.set);
                LossRow row{epoch, loss, al.lambda, al.mu};
                res.loss_history.push_back(row);
                if (progress) progress(row);
                adam_step(adam, params.flat(), grad.entries, cfg.lr);
                if ((epoch + 1) % cfg.interval() == 0) take_snapshot(epoch + 1);
            }
            const double c = mean_field(eval_batch(params, map, fixed.mass, false), spec) - cfg.m0;
            if (!std::isfinite(c)) throw DivergedError("mass");
            res.constraint_trace.push_back(std::abs(c));
            al = update_multiplier(al, c, k);
        }

        if (cfg.lbfgs_enabled && cfg.lbfgs.max_iters > 0 && epoch > 0) {
            Objective objective = [&](const Eigen::VectorXd& theta) {
                try {
                    auto [loss, grad] = loss_gradient(spec, al, NetParams(params.arch(), theta), map, fixed);
                    return std::pair<double, Eigen::VectorXd>{loss.total, std::move(grad.entries)};
                } catch (const DivergedError&) {
                    return std::pair<double, Eigen::VectorXd>{std::numeric_limits<double>::infinity(),
                                                              Eigen::VectorXd::Zero(theta.size())};
                }
            };
            LbfgsResult r = lbfgs_refine(objective, params.flat(), cfg.lbfgs);
            params.flat() = r.params;
            res.refine_trace = std::move(r.trace);
            res.refine_stop = r.stop;
            res.refine_warning = r.warning;
            take_snapshot(epoch);
        }

        res.final_loss = evaluate_loss(spec, al, params, map, fixed);
        res.status = std::abs(res.final_loss.constraint) <= cfg.tolerance ? RunStatus::converged
                                                                           : RunStatus::not_converged;
    } catch (const DivergedError& e) {
        res.status = RunStatus::diverged;
        res.diverged_term = e.term();
    }

    res.params = std::move(params);
    res.final_al = al;
    res.final_snapshot = std::move(last);
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

} // namespace ritz

#endif // RITZ_DRIVER_HPP
