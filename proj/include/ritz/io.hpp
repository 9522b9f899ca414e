#ifndef RITZ_IO_HPP
#define RITZ_IO_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ritz/driver.hpp"
#include "ritz/error.hpp"

namespace ritz {

/// Shortest text that parses back to exactly the same double.
inline std::string format_real(double v)
{
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw std::runtime_error("format_real: conversion failed");
    return std::string(buf, end);
}

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_ws(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

inline double parse_real(const std::string& s, const std::string& key)
{
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || !std::isfinite(v))
        throw ConfigError("key '" + key + "': expected a real number, got '" + s + "'");
    return v;
}

inline long parse_integer(const std::string& s, const std::string& key)
{
    long v = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) throw ConfigError("key '" + key + "': expected an integer, got '" + s + "'");
    return v;
}

inline bool parse_bool(const std::string& s, const std::string& key)
{
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    throw ConfigError("key '" + key + "': expected true or false, got '" + s + "'");
}

} // namespace detail

/// Flat "section.key" -> value map read from an INI-style text.
using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& in)
{
    KeyValues kv;
    std::string section;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        const auto hash = line.find_first_of("#;");
        const std::string t = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = detail::trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value, got '" + t + "'");
        const std::string name = detail::trim(t.substr(0, eq));
        const std::string key = section.empty() ? name : section + "." + name;
        if (name.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (kv.contains(key)) throw ConfigError("key '" + key + "' given twice");
        kv[key] = detail::trim(t.substr(eq + 1));
    }
    return kv;
}

namespace detail {

// Binds config keys to RunConfig fields in both directions.
template <class Visitor>
void visit_config(RunConfig& c, Visitor&& v)
{
    v.integer("problem.dim", c.dim);
    v.reals("problem.length", c.lengths);
    v.real("problem.epsilon", c.epsilon);
    v.real("problem.m0", c.m0);
    v.mode("problem.mode", c.mode);

    v.kind("features.kind", c.feature_kind);
    v.opt_integer("features.max_freq", c.max_freq);
    v.opt_integer("features.rff_modes", c.rff_modes);
    v.opt_real("features.rff_scale", c.rff_scale);
    v.boolean("features.wrap", c.wrap_inputs);

    v.integer("network.width", c.width);
    v.integer("network.blocks", c.blocks);

    v.integer("training.outer", c.outer);
    v.integer("training.inner", c.inner);
    v.real("training.lr", c.lr);
    v.seed("training.seed", c.seed);
    v.real("training.adam_beta1", c.adam_beta1);
    v.real("training.adam_beta2", c.adam_beta2);
    v.real("training.adam_eps", c.adam_eps);

    v.real("constraint.lambda0", c.al.lambda);
    v.real("constraint.mu0", c.al.mu);
    v.real("constraint.mu_max", c.al.mu_max);
    v.real("constraint.rho", c.al.rho);
    v.integer("constraint.freeze_outer", c.al.freeze_outer);
    v.real("constraint.alpha", c.alpha);
    v.real("constraint.tolerance", c.tolerance);

    v.sampler("sampling.sampler", c.energy_sampler);
    v.long_integer("sampling.energy_points", c.energy_points);
    v.boolean("sampling.grid_right_edge", c.grid_right_edge);
    v.long_integer("sampling.mass_points", c.mass_points);
    v.long_integer("sampling.mass_skip", c.mass_skip);
    v.boolean("sampling.redraw", c.redraw);
    v.integer("sampling.boundary_points", c.boundary_points);

    v.boolean("refine.enabled", c.lbfgs_enabled);
    v.integer("refine.memory", c.lbfgs.memory);
    v.integer("refine.max_iters", c.lbfgs.max_iters);
    v.real("refine.grad_tol", c.lbfgs.grad_tol);
    v.real("refine.wolfe_c1", c.lbfgs.wolfe_c1);
    v.real("refine.wolfe_c2", c.lbfgs.wolfe_c2);
    v.integer("refine.max_line_evals", c.lbfgs.max_line_evals);
    v.long_integer("refine.max_evals", c.lbfgs.max_evals);

    v.integer("output.snapshot_resolution", c.snapshot_resolution);
    v.integer("output.snapshot_interval", c.snapshot_interval);
}

struct ConfigReader {
    KeyValues& kv;

    const std::string* take(const std::string& key)
    {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    }
    void integer(const std::string& k, int& f)
    {
        if (auto* s = take(k)) f = static_cast<int>(parse_integer(*s, k));
    }
    void long_integer(const std::string& k, long& f)
    {
        if (auto* s = take(k)) f = parse_integer(*s, k);
    }
    void seed(const std::string& k, std::uint64_t& f)
    {
        if (auto* s = take(k)) {
            const long v = parse_integer(*s, k);
            if (v < 0) throw ConfigError("key '" + k + "': seed must be >= 0");
            f = static_cast<std::uint64_t>(v);
        }
    }
    void real(const std::string& k, double& f)
    {
        if (auto* s = take(k)) f = parse_real(*s, k);
    }
    void reals(const std::string& k, std::vector<double>& f)
    {
        if (auto* s = take(k)) {
            f.clear();
            for (const auto& tok : split_ws(*s)) f.push_back(parse_real(tok, k));
            if (f.empty()) throw ConfigError("key '" + k + "': expected at least one value");
        }
    }
    void opt_integer(const std::string& k, std::optional<int>& f)
    {
        if (auto* s = take(k)) f = static_cast<int>(parse_integer(*s, k));
    }
    void opt_real(const std::string& k, std::optional<double>& f)
    {
        if (auto* s = take(k)) f = parse_real(*s, k);
    }
    void boolean(const std::string& k, bool& f)
    {
        if (auto* s = take(k)) f = parse_bool(*s, k);
    }
    void mode(const std::string& k, Mode& f)
    {
        if (auto* s = take(k)) try {
                f = parse_mode(*s);
            } catch (const ConfigError& e) {
                throw ConfigError("key '" + k + "': " + e.what());
            }
    }
    void kind(const std::string& k, FeatureKind& f)
    {
        if (auto* s = take(k)) try {
                f = parse_feature_kind(*s);
            } catch (const ConfigError& e) {
                throw ConfigError("key '" + k + "': " + e.what());
            }
    }
    void sampler(const std::string& k, Sampler& f)
    {
        if (auto* s = take(k)) try {
                f = parse_sampler(*s);
            } catch (const ConfigError& e) {
                throw ConfigError("key '" + k + "': " + e.what());
            }
    }
};

struct ConfigWriter {
    std::ostream& out;
    std::string section;

    void key(const std::string& k, const std::string& value)
    {
        const auto dot = k.find('.');
        const std::string sec = k.substr(0, dot);
        if (sec != section) {
            out << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
            section = sec;
        }
        out << k.substr(dot + 1) << " = " << value << '\n';
    }
    void integer(const std::string& k, int f) { key(k, std::to_string(f)); }
    void long_integer(const std::string& k, long f) { key(k, std::to_string(f)); }
    void seed(const std::string& k, std::uint64_t f) { key(k, std::to_string(f)); }
    void real(const std::string& k, double f) { key(k, format_real(f)); }
    void reals(const std::string& k, const std::vector<double>& f)
    {
        std::string s;
        for (double x : f) s += (s.empty() ? "" : " ") + format_real(x);
        key(k, s);
    }
    void opt_integer(const std::string& k, const std::optional<int>& f)
    {
        if (f) integer(k, *f);
    }
    void opt_real(const std::string& k, const std::optional<double>& f)
    {
        if (f) real(k, *f);
    }
    void boolean(const std::string& k, bool f) { key(k, f ? "true" : "false"); }
    void mode(const std::string& k, Mode f) { key(k, to_string(f)); }
    void kind(const std::string& k, FeatureKind f) { key(k, to_string(f)); }
    void sampler(const std::string& k, Sampler f) { key(k, to_string(f)); }
};

} // namespace detail

/// Applies every key to a default RunConfig; unknown keys are errors.
inline RunConfig config_from_keys(KeyValues kv)
{
    RunConfig cfg;
    detail::ConfigReader reader{kv};
    // Resolve the dimension first so a missing length defaults to the unit box.
    if (auto it = kv.find("problem.dim"); it != kv.end()) {
        cfg.dim = static_cast<int>(detail::parse_integer(it->second, it->first));
        cfg.lengths.assign(static_cast<std::size_t>(std::max(cfg.dim, 1)), 1.0);
    }
    detail::visit_config(cfg, reader);
    for (const auto& [key, value] : kv) {
        static const std::vector<std::string> known = [] {
            std::vector<std::string> keys;
            RunConfig probe;
            struct Lister {
                std::vector<std::string>& keys;
                void add(const std::string& k) { keys.push_back(k); }
                void integer(const std::string& k, int&) { add(k); }
                void long_integer(const std::string& k, long&) { add(k); }
                void seed(const std::string& k, std::uint64_t&) { add(k); }
                void real(const std::string& k, double&) { add(k); }
                void reals(const std::string& k, std::vector<double>&) { add(k); }
                void opt_integer(const std::string& k, std::optional<int>&) { add(k); }
                void opt_real(const std::string& k, std::optional<double>&) { add(k); }
                void boolean(const std::string& k, bool&) { add(k); }
                void mode(const std::string& k, Mode&) { add(k); }
                void kind(const std::string& k, FeatureKind&) { add(k); }
                void sampler(const std::string& k, Sampler&) { add(k); }
            } lister{keys};
            detail::visit_config(probe, lister);
            return keys;
        }();
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown key '" + key + "'");
    }
    return cfg;
}

inline RunConfig parse_config(const std::string& text)
{
    std::istringstream in(text);
    return config_from_keys(parse_key_values(in));
}

inline RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    return config_from_keys(parse_key_values(in));
}

inline std::string format_config(const RunConfig& cfg)
{
    std::ostringstream out;
    RunConfig copy = cfg;
    detail::ConfigWriter writer{out, {}};
    detail::visit_config(copy, writer);
    return out.str();
}

// ---------------------------------------------------------------- CSV output

inline std::ofstream open_output(const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

inline void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows)
{
    auto out = open_output(path);
    out << "epoch,energy,mass,boundary,total,mean_u,constraint,lambda,mu\n";
    for (const LossRow& r : rows)
        out << r.epoch << ',' << format_real(r.loss.energy) << ',' << format_real(r.loss.mass) << ','
            << format_real(r.loss.boundary) << ',' << format_real(r.loss.total) << ',' << format_real(r.loss.mean_u)
            << ',' << format_real(r.loss.constraint) << ',' << format_real(r.lambda) << ',' << format_real(r.mu)
            << '\n';
}

inline void write_error_csv(const std::filesystem::path& path, const std::vector<ErrorRow>& rows)
{
    auto out = open_output(path);
    out << "snapshot_epoch,error\n";
    for (const ErrorRow& r : rows) out << r.epoch << ',' << format_real(r.error) << '\n';
}

inline void write_series_csv(const std::filesystem::path& path, const std::string& header,
                             const std::vector<double>& values)
{
    auto out = open_output(path);
    out << "index," << header << '\n';
    for (std::size_t i = 0; i < values.size(); ++i) out << i << ',' << format_real(values[i]) << '\n';
}

// ---------------------------------------------------------------- field files

struct FieldMeta {
    double epsilon = 0.0;
    double m0 = 0.0;
    std::uint64_t seed = 0;
    double energy = std::nan("");
};

/// A field on a uniform periodic grid plus the run it came from.
struct FieldFile {
    GridField field;
    std::vector<double> lo;
    FieldMeta meta;
};

inline FieldFile field_file(const FieldSnapshot& s, const FieldMeta& meta)
{
    return FieldFile{s.as_grid_field(), s.domain.lo, meta};
}

namespace detail {

inline std::string join_reals(const std::vector<double>& v)
{
    std::string s;
    for (double x : v) s += (s.empty() ? "" : " ") + format_real(x);
    return s;
}

inline std::string meta_line(const FieldFile& f)
{
    std::string shape;
    for (int n : f.field.shape) shape += (shape.empty() ? "" : " ") + std::to_string(n);
    std::vector<double> hi(f.lo.size());
    for (std::size_t j = 0; j < hi.size(); ++j) hi[j] = f.lo[j] + f.field.lengths[j];
    return "dim=" + std::to_string(f.field.dim()) + ";shape=" + shape + ";lo=" + join_reals(f.lo)
           + ";hi=" + join_reals(hi) + ";epsilon=" + format_real(f.meta.epsilon) + ";m0=" + format_real(f.meta.m0)
           + ";seed=" + std::to_string(f.meta.seed) + ";energy=" + format_real(f.meta.energy);
}

inline FieldFile parse_meta(const std::string& text)
{
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    for (std::string item; std::getline(in, item, ';');) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) continue;
        kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
    }
    for (const char* k : {"dim", "shape", "lo", "hi", "epsilon", "m0", "seed", "energy"})
        if (!kv.contains(k)) throw ConfigError(std::string("field file: header lacks '") + k + "'");
    FieldFile f;
    const int d = static_cast<int>(parse_integer(kv["dim"], "dim"));
    for (const auto& t : split_ws(kv["shape"])) f.field.shape.push_back(static_cast<int>(parse_integer(t, "shape")));
    for (const auto& t : split_ws(kv["lo"])) f.lo.push_back(parse_real(t, "lo"));
    std::vector<double> hi;
    for (const auto& t : split_ws(kv["hi"])) hi.push_back(parse_real(t, "hi"));
    require(static_cast<int>(f.field.shape.size()) == d && static_cast<int>(f.lo.size()) == d
                && static_cast<int>(hi.size()) == d,
            "field file: shape, lo and hi need one entry per dimension");
    for (int j = 0; j < d; ++j) f.field.lengths.push_back(hi[j] - f.lo[j]);
    f.meta.epsilon = parse_real(kv["epsilon"], "epsilon");
    f.meta.m0 = parse_real(kv["m0"], "m0");
    f.meta.seed = static_cast<std::uint64_t>(parse_integer(kv["seed"], "seed"));
    const std::string& e = kv["energy"];
    f.meta.energy = (e == "nan" || e == "-nan") ? std::nan("") : parse_real(e, "energy");
    return f;
}

} // namespace detail

/**
 * 1D and 2D: CSV with a "# ritz-field" header line; one grid row (first axis
 * varying along the line) per text line. 3D: legacy VTK structured points,
 * metadata in the title line.
 */
inline void write_field(const std::filesystem::path& path, const FieldFile& f)
{
    f.field.validate();
    auto out = open_output(path);
    const int d = f.field.dim();
    const Eigen::VectorXd& v = f.field.values;
    if (d <= 2) {
        out << "# ritz-field " << detail::meta_line(f) << '\n';
        const int nx = f.field.shape[0];
        const Eigen::Index rows = v.size() / nx;
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (int i = 0; i < nx; ++i) out << (i ? "," : "") << format_real(v[r * nx + i]);
            out << '\n';
        }
        return;
    }
    out << "# vtk DataFile Version 3.0\n";
    out << "ritz-field " << detail::meta_line(f) << '\n';
    out << "ASCII\nDATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << f.field.shape[0] << ' ' << f.field.shape[1] << ' ' << f.field.shape[2] << '\n';
    out << "ORIGIN " << format_real(f.lo[0]) << ' ' << format_real(f.lo[1]) << ' ' << format_real(f.lo[2]) << '\n';
    out << "SPACING " << format_real(f.field.spacing(0)) << ' ' << format_real(f.field.spacing(1)) << ' '
        << format_real(f.field.spacing(2)) << '\n';
    out << "POINT_DATA " << v.size() << "\nSCALARS u double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index i = 0; i < v.size(); ++i) out << format_real(v[i]) << ((i + 1) % 8 == 0 ? '\n' : ' ');
    if (v.size() % 8 != 0) out << '\n';
}

inline FieldFile read_field(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open field file '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    FieldFile f;
    std::vector<double> values;
    auto read_numbers = [&](char sep) {
        std::string tok;
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            while (std::getline(ls, tok, sep)) {
                tok = detail::trim(tok);
                if (!tok.empty()) values.push_back(detail::parse_real(tok, "value"));
            }
        }
    };
    if (line.rfind("# ritz-field ", 0) == 0) {
        f = detail::parse_meta(line.substr(13));
        read_numbers(',');
    } else if (line.rfind("# vtk", 0) == 0) {
        std::getline(in, line);
        if (line.rfind("ritz-field ", 0) != 0) throw ConfigError("field file: VTK title lacks ritz metadata");
        f = detail::parse_meta(line.substr(11));
        while (std::getline(in, line) && line.rfind("LOOKUP_TABLE", 0) != 0) {
        }
        read_numbers(' ');
    } else {
        throw ConfigError("field file '" + path.string() + "': unrecognised header");
    }
    f.field.values = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    f.field.validate();
    return f;
}

inline std::filesystem::path field_path(const std::filesystem::path& dir, int dim)
{
    return dir / (dim == 3 ? "field.vtk" : "field.csv");
}

// ---------------------------------------------------------------- checkpoints

struct Checkpoint {
    NetParams params;
    FeatureMap map;
    Box domain;
};

/**
 * Text checkpoint: a magic line, the architecture triple, the feature-map
 * descriptor (kind, wrap, periods, frequency matrix), the domain box and the
 * flat parameters, all at full precision.
 */
inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c)
{
    auto out = open_output(path);
    const Architecture& a = c.params.arch();
    out << "ritz-checkpoint 1\n";
    out << "architecture " << a.input_dim << ' ' << a.width << ' ' << a.n_blocks << '\n';
    out << "features " << to_string(c.map.kind) << ' ' << (c.map.wrap_inputs ? 1 : 0) << ' ' << c.map.dim() << ' '
        << c.map.modes() << '\n';
    out << "periods " << detail::join_reals(c.map.periods) << '\n';
    out << "domain " << detail::join_reals(c.domain.lo) << ' ' << detail::join_reals(c.domain.hi) << '\n';
    for (int k = 0; k < c.map.modes(); ++k) {
        out << "mode";
        for (int j = 0; j < c.map.dim(); ++j) out << ' ' << format_real(c.map.B(k, j));
        out << '\n';
    }
    out << "params " << c.params.size() << '\n';
    for (Eigen::Index i = 0; i < c.params.size(); ++i) out << format_real(c.params.flat()[i]) << '\n';
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
    auto expect = [&](const std::string& word) {
        std::string w;
        in >> w;
        if (w != word) throw ConfigError("checkpoint: expected '" + word + "', found '" + w + "'");
    };
    auto real = [&] {
        std::string t;
        in >> t;
        return detail::parse_real(t, "checkpoint");
    };
    expect("ritz-checkpoint");
    int version = 0;
    in >> version;
    require(version == 1, "checkpoint: unsupported version");
    Architecture a;
    expect("architecture");
    in >> a.input_dim >> a.width >> a.n_blocks;
    std::string kind;
    int wrap = 0;
    int d = 0;
    int modes = 0;
    expect("features");
    in >> kind >> wrap >> d >> modes;
    require(in.good() && d >= 1 && modes >= 0, "checkpoint: malformed feature descriptor");
    Checkpoint c;
    c.map.kind = parse_feature_kind(kind);
    c.map.wrap_inputs = wrap != 0;
    expect("periods");
    for (int j = 0; j < d; ++j) c.map.periods.push_back(real());
    expect("domain");
    for (int j = 0; j < d; ++j) c.domain.lo.push_back(real());
    for (int j = 0; j < d; ++j) c.domain.hi.push_back(real());
    c.domain.validate();
    c.map.B.resize(modes, d);
    for (int k = 0; k < modes; ++k) {
        expect("mode");
        for (int j = 0; j < d; ++j) c.map.B(k, j) = real();
    }
    expect("params");
    Eigen::Index n = 0;
    in >> n;
    Eigen::VectorXd flat(n);
    for (Eigen::Index i = 0; i < n; ++i) flat[i] = real();
    require(c.map.output_dim() == a.input_dim, "checkpoint: feature map and architecture disagree");
    c.params = NetParams(a, std::move(flat));
    return c;
}

} // namespace ritz

#endif // RITZ_IO_HPP
