#ifndef RITZ_FEATURES_HPP
#define RITZ_FEATURES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ritz/error.hpp"

namespace ritz {

enum class FeatureKind { none, random, cartesian, separable, hybrid };

inline const char* to_string(FeatureKind k)
{
    switch (k) {
    case FeatureKind::none: return "none";
    case FeatureKind::random: return "random";
    case FeatureKind::cartesian: return "cartesian";
    case FeatureKind::separable: return "separable";
    case FeatureKind::hybrid: return "hybrid";
    }
    return "?";
}

inline FeatureKind parse_feature_kind(const std::string& s)
{
    if (s == "none") return FeatureKind::none;
    if (s == "random" || s == "rff") return FeatureKind::random;
    if (s == "cartesian") return FeatureKind::cartesian;
    if (s == "separable") return FeatureKind::separable;
    if (s == "hybrid") return FeatureKind::hybrid;
    throw ConfigError("unknown feature kind '" + s + "'");
}

/**
 * Fourier feature map x -> [cos(2 pi B x); sin(2 pi B x)].
 *
 * Rows of B are frequency vectors already divided by the axis periods, so
 * integer-frequency kinds (cartesian, separable, and the separable part of
 * hybrid) are exactly L_j-periodic along every axis. Kind `none` is the
 * identity map with output dimension d.
 */
struct FeatureMap {
    FeatureKind kind = FeatureKind::none;
    Eigen::MatrixXd B;            // m x d
    std::vector<double> periods;  // L_j
    bool wrap_inputs = false;

    int dim() const { return static_cast<int>(periods.size()); }
    int modes() const { return static_cast<int>(B.rows()); }
    int output_dim() const { return kind == FeatureKind::none ? dim() : 2 * modes(); }

    /// True when every retained frequency times its period is an integer.
    bool integer_frequencies() const
    {
        if (kind == FeatureKind::none || kind == FeatureKind::random) return false;
        return integer_rows() == modes();
    }

    /// Number of leading rows of B with integer frequencies.
    int integer_rows() const
    {
        if (kind == FeatureKind::none || kind == FeatureKind::random) return 0;
        int rows = 0;
        for (int k = 0; k < modes(); ++k) {
            for (int j = 0; j < dim(); ++j) {
                const double n = B(k, j) * periods[j];
                if (std::abs(n - std::round(n)) > 1e-12) return rows;
            }
            ++rows;
        }
        return rows;
    }

    double wrap(double x, int j) const
    {
        if (!wrap_inputs) return x;
        const double r = std::fmod(x, periods[j]);
        return r < 0.0 ? r + periods[j] : r;
    }
};

/// Mode count of the separable construction.
constexpr int separable_modes(int d, int f_max) { return 1 + d * 2 * f_max; }

/// Mode count of the full Cartesian construction.
constexpr int cartesian_modes(int d, int f_max)
{
    int m = 1;
    for (int j = 0; j < d; ++j) m *= 2 * f_max + 1;
    return m;
}

namespace detail {

inline Eigen::MatrixXd separable_frequencies(int d, int f_max, const std::vector<double>& periods)
{
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(separable_modes(d, f_max), d);
    int row = 1; // row 0 is the zero frequency
    for (int j = 0; j < d; ++j)
        for (int n = -f_max; n <= f_max; ++n) {
            if (n == 0) continue;
            B(row++, j) = n / periods[j];
        }
    return B;
}

inline Eigen::MatrixXd cartesian_frequencies(int d, int f_max, const std::vector<double>& periods)
{
    const int m = cartesian_modes(d, f_max);
    Eigen::MatrixXd B(m, d);
    // Lexicographic: first axis is the most significant digit.
    std::vector<int> n(d, -f_max);
    for (int k = 0; k < m; ++k) {
        for (int j = 0; j < d; ++j) B(k, j) = n[j] / periods[j];
        for (int j = d - 1; j >= 0; --j) {
            if (++n[j] <= f_max) break;
            n[j] = -f_max;
        }
    }
    return B;
}

inline Eigen::MatrixXd random_frequencies(int d, int count, double scale, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::MatrixXd B(count, d);
    for (int k = 0; k < count; ++k)
        for (int j = 0; j < d; ++j) B(k, j) = normal(rng);
    return B;
}

} // namespace detail

/**
 * Build a feature map.
 *
 * random: m_rff rows drawn N(0, s^2); cartesian: {-f..f}^d in lexicographic
 * order; separable: zero row then the nonzero axis-aligned modes per axis;
 * hybrid: separable rows stacked above m_rff random rows.
 */
inline FeatureMap build_feature_map(FeatureKind kind, int d, const std::vector<double>& periods,
                                    std::optional<int> f_max, std::optional<int> m_rff, std::optional<double> scale,
                                    std::uint64_t seed, bool wrap_inputs = true)
{
    require(d >= 1, "feature map: dimension must be >= 1");
    require(static_cast<int>(periods.size()) == d, "feature map: periods length must equal dimension");
    for (double L : periods) require(L > 0.0, "feature map: periods must be positive");

    const bool needs_f = kind == FeatureKind::cartesian || kind == FeatureKind::separable || kind == FeatureKind::hybrid;
    const bool needs_rff = kind == FeatureKind::random || kind == FeatureKind::hybrid;
    if (needs_f && !f_max) throw ConfigError(std::string("feature map '") + to_string(kind) + "' needs max_freq");
    if (needs_rff && !m_rff) throw ConfigError(std::string("feature map '") + to_string(kind) + "' needs rff_modes");
    if (needs_f) require(*f_max >= 0, "feature map: max_freq must be >= 0");
    if (needs_rff) {
        require(*m_rff >= 1, "feature map: rff_modes must be >= 1");
        require(scale && *scale > 0.0, "feature map: rff_scale must be > 0");
    }

    FeatureMap map;
    map.kind = kind;
    map.periods = periods;
    map.wrap_inputs = kind != FeatureKind::none && wrap_inputs;

    switch (kind) {
    case FeatureKind::none: map.B.resize(0, d); break;
    case FeatureKind::random: map.B = detail::random_frequencies(d, *m_rff, *scale, seed); break;
    case FeatureKind::cartesian: map.B = detail::cartesian_frequencies(d, *f_max, periods); break;
    case FeatureKind::separable: map.B = detail::separable_frequencies(d, *f_max, periods); break;
    case FeatureKind::hybrid: {
        const Eigen::MatrixXd sep = detail::separable_frequencies(d, *f_max, periods);
        const Eigen::MatrixXd rff = detail::random_frequencies(d, *m_rff, *scale, seed);
        map.B.resize(sep.rows() + rff.rows(), d);
        map.B << sep, rff;
        break;
    }
    }
    return map;
}

inline FeatureMap identity_features(int d)
{
    return build_feature_map(FeatureKind::none, d, std::vector<double>(d, 1.0), {}, {}, {}, 0);
}

/// gamma(x): first m entries cos(2 pi (Bx)_k), last m entries sin(2 pi (Bx)_k).
inline Eigen::VectorXd apply_features(const FeatureMap& map, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    const int d = map.dim();
    require(x.size() == d, "apply_features: point dimension mismatch");
    if (map.kind == FeatureKind::none) return x;

    const int m = map.modes();
    Eigen::VectorXd out(2 * m);
    for (int k = 0; k < m; ++k) {
        double phase = 0.0;
        for (int j = 0; j < d; ++j) phase += map.B(k, j) * map.wrap(x[j], j);
        phase *= 2.0 * std::numbers::pi;
        out[k] = std::cos(phase);
        out[m + k] = std::sin(phase);
    }
    return out;
}

/// d gamma / dx, a (2m x d) matrix. Input wrapping has unit derivative.
inline Eigen::MatrixXd feature_jacobian(const FeatureMap& map, const Eigen::Ref<const Eigen::VectorXd>& x)
{
    const int d = map.dim();
    require(x.size() == d, "feature_jacobian: point dimension mismatch");
    if (map.kind == FeatureKind::none) return Eigen::MatrixXd::Identity(d, d);

    const int m = map.modes();
    constexpr double two_pi = 2.0 * std::numbers::pi;
    Eigen::MatrixXd J(2 * m, d);
    for (int k = 0; k < m; ++k) {
        double phase = 0.0;
        for (int j = 0; j < d; ++j) phase += map.B(k, j) * map.wrap(x[j], j);
        phase *= two_pi;
        const double c = std::cos(phase);
        const double s = std::sin(phase);
        for (int j = 0; j < d; ++j) {
            J(k, j) = -two_pi * map.B(k, j) * s;
            J(m + k, j) = two_pi * map.B(k, j) * c;
        }
    }
    return J;
}

} // namespace ritz

#endif // RITZ_FEATURES_HPP
