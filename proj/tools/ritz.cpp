// ritz: train, check and compare Deep Ritz phase-field solutions.
//
// Exit codes: 0 success, 1 failure (gradient check above tolerance, I/O),
// 2 malformed configuration or arguments, 3 diverged run, 4 run finished
// without meeting the constraint tolerance.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include "ritz/diffkernel.hpp"
#include "ritz/driver.hpp"
#include "ritz/io.hpp"
#include "ritz/oracle.hpp"

namespace fs = std::filesystem;
using namespace ritz;

namespace {

enum Exit { ok = 0, failure = 1, bad_config = 2, diverged = 3, not_converged = 4 };

#ifndef RITZ_CONFIG_DIR
#define RITZ_CONFIG_DIR "configs"
#endif

// A bare name such as "1d-trivial" resolves to a shipped reference config.
fs::path resolve_config(const std::string& arg)
{
    if (fs::exists(arg)) return arg;
    for (const fs::path& p : {fs::path(RITZ_CONFIG_DIR) / (arg + ".cfg"), fs::path("configs") / (arg + ".cfg")})
        if (fs::exists(p)) return p;
    throw ConfigError("config '" + arg + "' not found");
}

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::string out = "out";
    bool quiet = false;
};

int cmd_run(const RunArgs& a)
{
    RunConfig cfg = load_config(resolve_config(a.config));
    if (a.seed) cfg.seed = *a.seed;
    if (a.mode) cfg.mode = parse_mode(*a.mode);
    cfg.validate();

    const fs::path out = a.out;
    fs::create_directories(out);
    {
        auto f = open_output(out / "config.cfg");
        f << format_config(cfg);
    }

    const long total = static_cast<long>(cfg.outer) * cfg.inner;
    const long every = std::max(1L, total / 20);
    ProgressFn progress;
    if (!a.quiet)
        progress = [&](const LossRow& r) {
            if (r.epoch % every == 0)
                std::fprintf(stderr, "epoch %6ld  energy %.6e  total %.6e  mean %.6f  lambda %.4e  mu %.3g\n", r.epoch,
                             r.loss.energy, r.loss.total, r.loss.mean_u, r.lambda, r.mu);
        };

    const TrainResult r = train(cfg, progress);

    write_loss_csv(out / "loss.csv", r.loss_history);
    write_error_csv(out / "error.csv", r.error_history);
    write_series_csv(out / "constraint.csv", "abs_constraint", r.constraint_trace);
    write_series_csv(out / "refine.csv", "total", r.refine_trace);

    if (r.status == RunStatus::diverged) {
        std::printf("status=diverged term=%s epochs=%zu wall=%.2fs\n", r.diverged_term.c_str(), r.loss_history.size(),
                    r.wall_seconds);
        return diverged;
    }

    write_field(field_path(out, cfg.dim),
                field_file(r.final_snapshot, {cfg.epsilon, cfg.m0, cfg.seed, r.final_loss.energy}));
    write_checkpoint(out / "checkpoint.txt", {r.params, r.map, cfg.domain()});

    std::printf("status=%s energy=%.6f total=%.6f constraint=%.3e mean=%.6f refine=%s wall=%.2fs\n",
                to_string(r.status).c_str(), r.final_loss.energy, r.final_loss.total, r.final_loss.constraint,
                r.final_loss.mean_u, r.refine_stop ? to_string(*r.refine_stop).c_str() : "off", r.wall_seconds);
    return r.status == RunStatus::converged ? ok : not_converged;
}

struct GradArgs {
    std::uint64_t seed = 0;
    int dim = 1;
    int max_freq = 3;
    int width = 32;
    int blocks = 3;
    long points = 64;
    int subset = 64;
    double h = 1e-5;
    double tol = 1e-4;
};

int cmd_gradcheck(const GradArgs& a)
{
    require(a.dim >= 1 && a.dim <= 3, "--dim must be 1, 2 or 3");
    const std::vector<double> lengths(static_cast<std::size_t>(a.dim), 1.0);
    const FeatureMap map = build_feature_map(FeatureKind::separable, a.dim, lengths, a.max_freq, {}, {}, a.seed);
    const NetParams params = init_network({map.output_dim(), a.width, a.blocks}, a.seed);
    const PointBatch batch = sobol_batch(a.points, a.dim, 1 + a.seed * static_cast<std::uint64_t>(a.points),
                                         Box::unit(a.dim));
    GradcheckOptions opt;
    opt.spec = LossSpec{0.04, 0.1, 0.0, 1.0};
    opt.subset = a.subset;
    opt.seed = a.seed;
    const GradcheckStats s = gradcheck_stats(params, map, BatchSet{batch, batch, std::nullopt}, a.h, opt);
    std::printf("max_rel_error=%.3e checked=%zu skipped_near_kink=%zu tol=%.1e\n", s.max_error, s.checked, s.rejected,
                a.tol);
    return s.max_error < a.tol && s.checked > 0 ? ok : failure;
}

struct OracleArgs {
    std::string action;
    int dim = 1;
    int n = 512;
    double epsilon = 0.04;
    double m0 = 0.6;
    int steps = 20000;
    double dt = 0.0;
    std::string init = "tanh";
    std::string pattern = "lamellar";
    std::string file;
    std::string out;
    std::uint64_t seed = 0;
};

int cmd_oracle(const OracleArgs& a)
{
    if (a.action == "sharp") {
        const SharpPattern p = a.pattern == "lamellar"    ? SharpPattern::lamellar
                               : a.pattern == "droplet2d" ? SharpPattern::droplet2d
                                                          : throw ConfigError("unknown pattern '" + a.pattern + "'");
        std::printf("energy=%.6f sigma=%.6f\n", sharp_interface_energy(p, a.epsilon, a.m0), line_tension(a.epsilon));
        return ok;
    }
    if (a.action == "energy") {
        const FieldFile f = read_field(a.file);
        const double eps = f.meta.epsilon > 0.0 ? f.meta.epsilon : a.epsilon;
        std::printf("discrete_energy=%.6f mean=%.6f\n", discrete_energy(f.field, eps), f.field.values.mean());
        return ok;
    }
    if (a.action == "descent") {
        GridField f0;
        if (a.init == "tanh") {
            require(a.dim == 1, "tanh init is one-dimensional");
            f0 = tanh_pair(a.n, 1.0, a.epsilon, a.m0);
        } else if (a.init == "random") {
            std::vector<int> shape(static_cast<std::size_t>(a.dim), a.n);
            f0 = GridField::constant(shape, std::vector<double>(shape.size(), 1.0), a.m0);
            std::mt19937_64 rng(a.seed);
            std::uniform_real_distribution<double> u(-0.05, 0.05);
            for (Eigen::Index i = 0; i < f0.values.size(); ++i) f0.values[i] += u(rng);
        } else {
            throw ConfigError("unknown init '" + a.init + "' (expected tanh or random)");
        }
        const double dt = a.dt > 0.0 ? a.dt : descent_dt_limit(f0, a.epsilon);
        const DescentResult r = projected_descent(f0, a.epsilon, a.m0, a.steps, dt, 1e-10);
        std::printf("energy=%.6f steps=%zu halvings=%d stalled=%d mean=%.12f\n", r.energy.back(), r.energy.size() - 1,
                    r.halvings, r.stalled ? 1 : 0, r.field.values.mean());
        if (!a.out.empty())
            write_field(a.out, FieldFile{r.field, std::vector<double>(f0.shape.size(), 0.0),
                                         {a.epsilon, a.m0, a.seed, r.energy.back()}});
        return ok;
    }
    throw ConfigError("unknown oracle action '" + a.action + "' (expected descent, sharp or energy)");
}

int cmd_export(const std::string& checkpoint, int resolution, const std::string& out, double epsilon, double m0)
{
    const Checkpoint c = read_checkpoint(checkpoint);
    const FieldSnapshot s = snapshot(c.params, c.map, c.domain, resolution);
    FieldFile f = field_file(s, {epsilon, m0, 0, std::nan("")});
    if (epsilon > 0.0) f.meta.energy = discrete_energy(f.field, epsilon);
    write_field(out, f);
    std::printf("wrote %s (%ld values)\n", out.c_str(), static_cast<long>(s.values.size()));
    return ok;
}

int cmd_compare(const std::string& a_path, const std::string& b_path)
{
    const FieldFile a = read_field(a_path);
    const FieldFile b = read_field(b_path);
    require(a.field.shape == b.field.shape && a.field.lengths == b.field.lengths && a.lo == b.lo,
            "compare: fields are on different grids");
    const double mean_sq = (a.field.values - b.field.values).squaredNorm() / static_cast<double>(a.field.values.size());
    double volume = 1.0;
    for (double l : a.field.lengths) volume *= l;
    const double dist = std::sqrt(volume * mean_sq);
    const double eps = a.meta.epsilon;
    if (eps > 0.0 && b.meta.epsilon == eps) {
        const double ea = discrete_energy(a.field, eps);
        const double eb = discrete_energy(b.field, eps);
        std::printf("l2_distance=%.6e energy_a=%.6f energy_b=%.6f energy_diff=%.6e\n", dist, ea, eb, ea - eb);
    } else {
        std::printf("l2_distance=%.6e\n", dist);
    }
    return ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Deep Ritz solver for periodic Cahn-Hilliard steady states"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "train a network from a config file");
    run_cmd->add_option("--config", run.config, "config file or reference name (e.g. 1d-trivial)")->required();
    run_cmd->add_option("--seed", run.seed, "override training.seed");
    run_cmd->add_option("--mode", run.mode, "override problem.mode")->check(CLI::IsMember({"penalty", "ffm"}));
    run_cmd->add_option("--out", run.out, "output directory");
    run_cmd->add_flag("--quiet", run.quiet, "no progress lines");

    GradArgs grad;
    auto* grad_cmd = app.add_subcommand("gradcheck", "compare loss gradients with central differences");
    grad_cmd->add_option("--seed", grad.seed);
    grad_cmd->add_option("--dim", grad.dim)->check(CLI::Range(1, 3));
    grad_cmd->add_option("--max-freq", grad.max_freq);
    grad_cmd->add_option("--width", grad.width);
    grad_cmd->add_option("--blocks", grad.blocks);
    grad_cmd->add_option("--points", grad.points);
    grad_cmd->add_option("--subset", grad.subset);
    grad_cmd->add_option("--step", grad.h, "finite-difference step");
    grad_cmd->add_option("--tol", grad.tol);

    OracleArgs orc;
    auto* orc_cmd = app.add_subcommand("oracle", "grid reference solutions");
    orc_cmd->add_option("action", orc.action, "descent, sharp or energy")->required();
    orc_cmd->add_option("file", orc.file, "field file (energy)");
    orc_cmd->add_option("--dim", orc.dim)->check(CLI::Range(1, 3));
    orc_cmd->add_option("--n", orc.n);
    orc_cmd->add_option("--epsilon", orc.epsilon);
    orc_cmd->add_option("--m0", orc.m0);
    orc_cmd->add_option("--steps", orc.steps);
    orc_cmd->add_option("--dt", orc.dt);
    orc_cmd->add_option("--init", orc.init);
    orc_cmd->add_option("--pattern", orc.pattern);
    orc_cmd->add_option("--seed", orc.seed);
    orc_cmd->add_option("--out", orc.out);

    std::string ckpt;
    std::string export_out = "field.csv";
    int resolution = 128;
    double export_eps = 0.0;
    double export_m0 = 0.0;
    auto* exp_cmd = app.add_subcommand("export", "sample a checkpoint onto a grid");
    exp_cmd->add_option("--checkpoint", ckpt)->required();
    exp_cmd->add_option("--resolution", resolution);
    exp_cmd->add_option("--out", export_out);
    exp_cmd->add_option("--epsilon", export_eps);
    exp_cmd->add_option("--m0", export_m0);

    std::string cmp_a;
    std::string cmp_b;
    auto* cmp_cmd = app.add_subcommand("compare", "L2 distance and energy difference of two field files");
    cmp_cmd->add_option("a", cmp_a)->required();
    cmp_cmd->add_option("b", cmp_b)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : bad_config;
    }

    try {
        if (*run_cmd) return cmd_run(run);
        if (*grad_cmd) return cmd_gradcheck(grad);
        if (*orc_cmd) return cmd_oracle(orc);
        if (*exp_cmd) return cmd_export(ckpt, resolution, export_out, export_eps, export_m0);
        if (*cmp_cmd) return cmd_compare(cmp_a, cmp_b);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return bad_config;
    } catch (const DivergedError& e) {
        std::fprintf(stderr, "diverged: %s\n", e.what());
        return diverged;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return failure;
    }
    return failure;
}
