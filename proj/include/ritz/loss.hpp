#ifndef RITZ_LOSS_HPP
#define RITZ_LOSS_HPP

#include <Eigen/Dense>

#include <vector>

#include "ritz/augmented_lagrangian.hpp"
#include "ritz/error.hpp"
#include "ritz/tape.hpp"

namespace ritz {

struct LossSpec {
    double epsilon = 0.04;
    double m0 = 0.0;
    double alpha = 0.0; // boundary weight
    double volume = 1.0;

    void validate() const
    {
        require(epsilon > 0.0, "loss: epsilon must be > 0");
        require(volume > 0.0, "loss: volume must be > 0");
    }
};

struct LossBreakdown {
    double energy = 0.0;
    double mass = 0.0;
    double boundary = 0.0;
    double total = 0.0;
    double mean_u = 0.0;
    double constraint = 0.0;
};

/// Pointwise Ginzburg-Landau density (eps^2/2)|g|^2 + (u^2-1)^2/4.
inline double energy_density(double u, double grad_sq, double epsilon)
{
    const double w = u * u - 1.0;
    return 0.5 * epsilon * epsilon * grad_sq + 0.25 * w * w;
}

/// Volume times the sample mean of the energy density.
inline double energy_term(const EvalResult& res, const LossSpec& spec)
{
    const Eigen::Index n = res.values.size();
    require(n > 0, "energy_term: empty evaluation");
    require(res.spatial_grads.cols() == n, "energy_term: spatial gradients missing");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        sum += energy_density(res.values[i], res.spatial_grads.col(i).squaredNorm(), spec.epsilon);
    return spec.volume * sum / static_cast<double>(n);
}

/// Quadrature estimate of the integral of u (equals the mean on unit domains).
inline double mean_field(const EvalResult& res, const LossSpec& spec)
{
    require(res.values.size() > 0, "mean_field: empty evaluation");
    return spec.volume * res.values.mean();
}

inline double augmented_lagrange_term(double mean_u, const LossSpec& spec, const ALState& al)
{
    const double c = mean_u - spec.m0;
    return al.lambda * c + 0.5 * al.mu * c * c;
}

inline LossBreakdown assemble_total(double energy, double mass, double boundary, double alpha, double mean_u = 0.0,
                                    double constraint = 0.0)
{
    LossBreakdown b;
    b.energy = energy;
    b.mass = mass;
    b.boundary = boundary;
    b.total = energy + mass + alpha * boundary;
    b.mean_u = mean_u;
    b.constraint = constraint;
    return b;
}

/// Matched periodic boundary points: lower[j].col(i) pairs with upper[j].col(i) across axis j.
struct BoundaryPairs {
    std::vector<PointBatch> lower;
    std::vector<PointBatch> upper;

    std::size_t axes() const { return lower.size(); }
};

/**
 * Pairs on opposite faces of the box. Face coordinates come from a grid with
 * `per_dim` points per remaining axis (right edge included); in 1D there is a
 * single pair (lo, hi).
 */
inline BoundaryPairs make_boundary_pairs(const Box& domain, int per_dim)
{
    const int d = domain.dim();
    BoundaryPairs pairs;
    for (int j = 0; j < d; ++j) {
        PointBatch lo;
        if (d == 1) {
            lo.points.resize(1, 1);
            lo.points(0, 0) = domain.lo[0];
        } else {
            Box face;
            for (int k = 0; k < d; ++k)
                if (k != j) {
                    face.lo.push_back(domain.lo[k]);
                    face.hi.push_back(domain.hi[k]);
                }
            const PointBatch g = grid_batch(per_dim, d - 1, face, true);
            lo.points.resize(d, g.size());
            for (int k = 0, f = 0; k < d; ++k) {
                if (k == j)
                    lo.points.row(k).setConstant(domain.lo[j]);
                else
                    lo.points.row(k) = g.points.row(f++);
            }
        }
        lo.domain = domain;
        PointBatch hi = lo;
        hi.points.row(j).setConstant(domain.hi[j]);
        pairs.lower.push_back(std::move(lo));
        pairs.upper.push_back(std::move(hi));
    }
    return pairs;
}

/**
 * Sum over axes of the mean squared mismatch between paired faces.
 * Only meaningful without an integer-frequency feature map, where
 * periodicity is not already built in.
 */
inline double boundary_penalty(const NetParams& params, const FeatureMap& map, const BoundaryPairs& pairs)
{
    require(!map.integer_frequencies(), "boundary penalty is redundant with an integer-frequency feature map");
    double total = 0.0;
    for (std::size_t j = 0; j < pairs.axes(); ++j) {
        const Eigen::VectorXd a = eval_batch(params, map, pairs.lower[j], false).values;
        const Eigen::VectorXd b = eval_batch(params, map, pairs.upper[j], false).values;
        total += (a - b).squaredNorm() / static_cast<double>(a.size());
    }
    return total;
}

} // namespace ritz

#endif // RITZ_LOSS_HPP
