#ifndef RITZ_AUGMENTED_LAGRANGIAN_HPP
#define RITZ_AUGMENTED_LAGRANGIAN_HPP

#include <algorithm>

namespace ritz {

/// Multiplier and penalty state of the mass constraint.
struct ALState {
    double lambda = 0.0;
    double mu = 1.0;
    double mu_max = 2.0;
    double rho = 1.2;
    int freeze_outer = 2; // outer cycles during which lambda stays at zero
};

/**
 * Outer-cycle update: lambda += mu * c (old mu), then mu = min(rho * mu, mu_max).
 * During the first freeze_outer cycles lambda is held at zero.
 */
inline ALState update_multiplier(ALState al, double constraint, int outer_index)
{
    if (outer_index < al.freeze_outer)
        al.lambda = 0.0;
    else
        al.lambda += al.mu * constraint;
    al.mu = std::min(al.rho * al.mu, al.mu_max);
    return al;
}

} // namespace ritz

#endif // RITZ_AUGMENTED_LAGRANGIAN_HPP
