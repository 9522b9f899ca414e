#ifndef RITZ_ORACLE_HPP
#define RITZ_ORACLE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "ritz/error.hpp"

namespace ritz {

/// Values on a uniform periodic grid; the first axis varies fastest.
struct GridField {
    std::vector<int> shape;
    std::vector<double> lengths;
    Eigen::VectorXd values;

    int dim() const { return static_cast<int>(shape.size()); }
    double spacing(int j) const { return lengths[j] / shape[j]; }

    double cell_volume() const
    {
        double v = 1.0;
        for (int j = 0; j < dim(); ++j) v *= spacing(j);
        return v;
    }

    Eigen::Index expected_size() const
    {
        Eigen::Index n = 1;
        for (int s : shape) n *= s;
        return n;
    }

    void validate() const
    {
        require(dim() >= 1 && dim() <= 3, "grid field: dimension must be 1, 2 or 3");
        require(lengths.size() == shape.size(), "grid field: lengths and shape differ in size");
        for (int j = 0; j < dim(); ++j) {
            require(shape[j] >= 4, "grid field: need at least 4 points per axis");
            require(lengths[j] > 0.0 && std::isfinite(lengths[j]), "grid field: lengths must be positive");
        }
        require(values.size() == expected_size(), "grid field: value count does not match shape");
        require(values.allFinite(), "grid field: non-finite value");
    }

    static GridField constant(std::vector<int> shape, std::vector<double> lengths, double c)
    {
        GridField f{std::move(shape), std::move(lengths), {}};
        f.values = Eigen::VectorXd::Constant(f.expected_size(), c);
        return f;
    }
};

namespace detail {

struct GridIndex {
    std::vector<Eigen::Index> stride;
    std::vector<int> n;

    explicit GridIndex(const GridField& f)
        : stride(f.shape.size()), n(f.shape)
    {
        Eigen::Index s = 1;
        for (std::size_t j = 0; j < n.size(); ++j) {
            stride[j] = s;
            s *= n[j];
        }
    }

    Eigen::Index next(Eigen::Index i, int j) const
    {
        const Eigen::Index c = (i / stride[j]) % n[j];
        return c == n[j] - 1 ? i - (n[j] - 1) * stride[j] : i + stride[j];
    }

    Eigen::Index prev(Eigen::Index i, int j) const
    {
        const Eigen::Index c = (i / stride[j]) % n[j];
        return c == 0 ? i + (n[j] - 1) * stride[j] : i - stride[j];
    }
};

} // namespace detail

/**
 * h^d * sum over cells of (eps^2/2)|grad phi|^2 + (phi^2 - 1)^2 / 4.
 * Derivatives are differences across cell faces, (phi[i+e_j] - phi[i]) / h_j,
 * so that variational_derivative() is the exact gradient of this sum.
 */
inline double discrete_energy(const GridField& f, double epsilon)
{
    f.validate();
    require(epsilon > 0.0, "discrete_energy: epsilon must be > 0");
    const detail::GridIndex ix(f);
    const double e2 = 0.5 * epsilon * epsilon;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < f.values.size(); ++i) {
        const double p = f.values[i];
        double grad2 = 0.0;
        for (int j = 0; j < f.dim(); ++j) {
            const double g = (f.values[ix.next(i, j)] - p) / f.spacing(j);
            grad2 += g * g;
        }
        const double w = p * p - 1.0;
        sum += e2 * grad2 + 0.25 * w * w;
    }
    return f.cell_volume() * sum;
}

/// -eps^2 Lap(phi) + phi^3 - phi with the periodic (2d+1)-point Laplacian.
inline GridField variational_derivative(const GridField& f, double epsilon)
{
    f.validate();
    require(epsilon > 0.0, "variational_derivative: epsilon must be > 0");
    const detail::GridIndex ix(f);
    GridField g{f.shape, f.lengths, Eigen::VectorXd(f.values.size())};
    const double e2 = epsilon * epsilon;
    for (Eigen::Index i = 0; i < f.values.size(); ++i) {
        const double p = f.values[i];
        double lap = 0.0;
        for (int j = 0; j < f.dim(); ++j) {
            const double h = f.spacing(j);
            lap += (f.values[ix.next(i, j)] - 2.0 * p + f.values[ix.prev(i, j)]) / (h * h);
        }
        g.values[i] = -e2 * lap + p * p * p - p;
    }
    return g;
}

/// Largest explicit step accepted by projected_descent.
inline double descent_dt_limit(const GridField& f, double epsilon)
{
    double h = f.spacing(0);
    for (int j = 1; j < f.dim(); ++j) h = std::min(h, f.spacing(j));
    return h * h / (epsilon * epsilon * std::max(4.0, 2.0 * f.dim()));
}

struct DescentResult {
    GridField field;
    std::vector<double> energy; // energy[0] is the projected start, one entry per accepted step after it
    double dt = 0.0;            // step size in use at the end
    int halvings = 0;
    bool stalled = false;       // no decrease even after repeated halving (a discrete critical point)
};

/**
 * Mass-projected gradient descent f <- f - dt (g - mean g), g = dF/dphi.
 * The start field is shifted to mean m0. A step that raises the discrete
 * energy is retried with dt halved; after 40 halvings the descent stops as
 * stalled. Stops early once max|g - mean g| < tol.
 */
inline DescentResult projected_descent(const GridField& f0, double epsilon, double m0, int steps, double dt,
                                       double tol = 0.0)
{
    f0.validate();
    require(steps >= 0, "projected_descent: steps must be >= 0");
    require(dt > 0.0, "projected_descent: dt must be > 0");
    const double limit = descent_dt_limit(f0, epsilon);
    require(dt <= limit, "projected_descent: dt " + std::to_string(dt) + " exceeds stability limit "
                             + std::to_string(limit));

    DescentResult r{f0, {}, dt, 0, false};
    r.field.values.array() += m0 - r.field.values.mean();
    double energy = discrete_energy(r.field, epsilon);
    r.energy.push_back(energy);

    GridField trial = r.field;
    for (int k = 0; k < steps; ++k) {
        GridField g = variational_derivative(r.field, epsilon);
        g.values.array() -= g.values.mean();
        if (tol > 0.0 && g.values.lpNorm<Eigen::Infinity>() < tol) break;
        bool accepted = false;
        for (int attempt = 0; attempt <= 40 && !accepted; ++attempt) {
            trial.values = r.field.values - r.dt * g.values;
            trial.values.array() += m0 - trial.values.mean();
            if (!trial.values.allFinite()) throw DivergedError("oracle descent");
            const double e = discrete_energy(trial, epsilon);
            if (e <= energy) {
                accepted = true;
                energy = e;
            } else {
                r.dt *= 0.5;
                ++r.halvings;
            }
        }
        if (!accepted) {
            r.stalled = true;
            break;
        }
        std::swap(r.field.values, trial.values);
        r.energy.push_back(energy);
    }
    return r;
}

/// Energy per unit area of a flat equilibrium interface, (2 sqrt 2 / 3) eps.
inline double line_tension(double epsilon) { return 2.0 * std::numbers::sqrt2 / 3.0 * epsilon; }

enum class SharpPattern { lamellar, droplet2d };

/// Sharp-interface energy on the unit box.
inline double sharp_interface_energy(SharpPattern pattern, double epsilon, double m0)
{
    require(epsilon > 0.0, "sharp_interface_energy: epsilon must be > 0");
    const double sigma = line_tension(epsilon);
    if (pattern == SharpPattern::lamellar) return 2.0 * sigma;
    require(m0 > 0.0 && m0 < 1.0, "sharp_interface_energy: droplet needs 0 < m0 < 1");
    const double area = 0.5 * (1.0 - m0); // minority phase at -1
    const double r = std::sqrt(area / std::numbers::pi);
    return sigma * 2.0 * std::numbers::pi * r;
}

/**
 * 1D field near +1 on a centred band and -1 elsewhere, joined by equilibrium
 * tanh profiles; the band width is chosen so the sharp mean is m0.
 */
inline GridField tanh_pair(int n, double length, double epsilon, double m0)
{
    require(m0 > -1.0 && m0 < 1.0, "tanh_pair: need -1 < m0 < 1");
    GridField f{{n}, {length}, Eigen::VectorXd(n)};
    const double band = 0.5 * (1.0 + m0) * length;
    const double a = 0.5 * (length - band);
    const double b = a + band;
    const double w = std::numbers::sqrt2 * epsilon;
    for (int i = 0; i < n; ++i) {
        const double x = length * i / n;
        double v = -1.0;
        for (int k = -1; k <= 1; ++k) // periodic images
            v += std::tanh((x - a - k * length) / w) - std::tanh((x - b - k * length) / w);
        f.values[i] = v;
    }
    return f;
}

} // namespace ritz

#endif // RITZ_ORACLE_HPP
