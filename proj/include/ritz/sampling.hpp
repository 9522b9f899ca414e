#ifndef RITZ_SAMPLING_HPP
#define RITZ_SAMPLING_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

#include "ritz/error.hpp"

namespace ritz {

/// Axis-aligned box [lo_j, hi_j] per dimension.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    static Box unit(int dim) { return Box{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

    int dim() const { return static_cast<int>(lo.size()); }
    double length(int j) const { return hi[j] - lo[j]; }
    double volume() const
    {
        double v = 1.0;
        for (int j = 0; j < dim(); ++j) v *= length(j);
        return v;
    }
    std::vector<double> periods() const
    {
        std::vector<double> p(lo.size());
        for (int j = 0; j < dim(); ++j) p[j] = length(j);
        return p;
    }
    void validate() const
    {
        require(!lo.empty() && lo.size() == hi.size(), "box: lo/hi dimension mismatch");
        for (int j = 0; j < dim(); ++j) require(hi[j] > lo[j], "box: empty extent on axis " + std::to_string(j));
    }
};

enum class PointOrigin { sobol, grid, custom };

/// Sample coordinates stored column-wise: points.col(i) is the i-th point (d x n).
struct PointBatch {
    Eigen::MatrixXd points;
    Box domain;
    PointOrigin origin = PointOrigin::custom;

    int dim() const { return static_cast<int>(points.rows()); }
    Eigen::Index size() const { return points.cols(); }
};

namespace detail {

constexpr int sobol_bits = 32;

struct SobolPoly {
    int degree;
    unsigned coeffs;
    std::array<std::uint32_t, 5> m;
};

// Joe & Kuo primitive polynomials and initial direction numbers for axes 2..8;
// axis 1 is the van der Corput sequence.
constexpr std::array<SobolPoly, 7> sobol_polys{{
    {1, 0, {1, 0, 0, 0, 0}},
    {2, 1, {1, 3, 0, 0, 0}},
    {3, 1, {1, 3, 1, 0, 0}},
    {3, 2, {1, 1, 1, 0, 0}},
    {4, 1, {1, 1, 3, 3, 0}},
    {4, 4, {1, 3, 5, 13, 0}},
    {5, 2, {1, 1, 5, 5, 17}},
}};

inline std::array<std::uint32_t, sobol_bits> sobol_directions(int axis)
{
    std::array<std::uint32_t, sobol_bits> v{};
    if (axis == 0) {
        for (int k = 0; k < sobol_bits; ++k) v[k] = std::uint32_t{1} << (sobol_bits - 1 - k);
        return v;
    }
    const SobolPoly& p = sobol_polys[axis - 1];
    const int s = p.degree;
    for (int k = 0; k < s && k < sobol_bits; ++k) v[k] = p.m[k] << (sobol_bits - 1 - k);
    for (int k = s; k < sobol_bits; ++k) {
        std::uint32_t x = v[k - s] ^ (v[k - s] >> s);
        for (int i = 1; i < s; ++i)
            if ((p.coeffs >> (s - 1 - i)) & 1u) x ^= v[k - i];
        v[k] = x;
    }
    return v;
}

} // namespace detail

/// Largest dimension with provisioned direction numbers.
constexpr int sobol_max_dim = 1 + static_cast<int>(detail::sobol_polys.size());

/**
 * Elements skip .. skip+n-1 of the base-2 Sobol sequence, mapped affinely
 * onto the domain. Element 0 is the origin; the default skip of 1 drops it.
 */
inline PointBatch sobol_batch(Eigen::Index n, int d, std::uint64_t skip, const Box& domain)
{
    require(n >= 1, "sobol_batch: n must be >= 1");
    require(d >= 1 && d <= sobol_max_dim, "sobol_batch: dimension " + std::to_string(d) + " exceeds provisioned "
                                              + std::to_string(sobol_max_dim));
    require(domain.dim() == d, "sobol_batch: domain dimension mismatch");
    require(skip + static_cast<std::uint64_t>(n) <= (std::uint64_t{1} << detail::sobol_bits),
            "sobol_batch: index range exceeds 2^32");
    domain.validate();

    PointBatch batch;
    batch.domain = domain;
    batch.origin = PointOrigin::sobol;
    batch.points.resize(d, n);

    constexpr double scale = 1.0 / 4294967296.0;
    for (int j = 0; j < d; ++j) {
        const auto v = detail::sobol_directions(j);
        // Direct Gray-code evaluation of the first element, then incremental updates.
        std::uint64_t idx = skip;
        std::uint32_t x = 0;
        std::uint64_t gray = idx ^ (idx >> 1);
        for (int b = 0; gray != 0; ++b, gray >>= 1)
            if (gray & 1u) x ^= v[b];
        const double lo = domain.lo[j];
        const double len = domain.length(j);
        for (Eigen::Index i = 0; i < n; ++i) {
            batch.points(j, i) = lo + len * (static_cast<double>(x) * scale);
            // lowest zero bit of idx selects the direction that flips
            int c = 0;
            for (std::uint64_t t = idx; t & 1u; t >>= 1) ++c;
            if (c < detail::sobol_bits) x ^= v[c];
            ++idx;
        }
    }
    return batch;
}

/// Tensor-product uniform grid with the first axis varying fastest.
/// Without the right edge the spacing is L/n (periodic-friendly); with it, L/(n-1).
inline PointBatch grid_batch(int n_per_dim, int d, const Box& domain, bool include_right_edge)
{
    require(n_per_dim >= 2, "grid_batch: n_per_dim must be >= 2");
    require(d >= 1 && domain.dim() == d, "grid_batch: domain dimension mismatch");
    domain.validate();

    Eigen::Index total = 1;
    for (int j = 0; j < d; ++j) total *= n_per_dim;

    PointBatch batch;
    batch.domain = domain;
    batch.origin = PointOrigin::grid;
    batch.points.resize(d, total);

    std::vector<double> h(d);
    for (int j = 0; j < d; ++j)
        h[j] = domain.length(j) / (include_right_edge ? n_per_dim - 1 : n_per_dim);

    std::vector<int> idx(d, 0);
    for (Eigen::Index i = 0; i < total; ++i) {
        for (int j = 0; j < d; ++j) {
            batch.points(j, i) = (include_right_edge && idx[j] == n_per_dim - 1) ? domain.hi[j]
                                                                                 : domain.lo[j] + idx[j] * h[j];
        }
        for (int j = 0; j < d; ++j) {
            if (++idx[j] < n_per_dim) break;
            idx[j] = 0;
        }
    }
    return batch;
}

} // namespace ritz

#endif // RITZ_SAMPLING_HPP
