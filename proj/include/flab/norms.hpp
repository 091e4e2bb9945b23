#pragma once

// Grid norms and quadrature norms of smooth data functions.
//
// Field norms use the grid's trapezoid weights.  The function-handle norms
// build their own uniform quadrature grid over the support and refine it
// until the value settles to 1e-4 relative; a refinement that still moves
// the value by more than 1e-3 relative is reported as an error carrying
// both values, never silently accepted.

#include "flab/grid.hpp"
#include "flab/profiles.hpp"

namespace flab {

double lp_norm(const ScalarField& f, double p);  // p in [1, inf]

// Sum over multi-indices |a| = k of the L1 norms of the partials.
double w_k1_homogeneous_norm(const DataFunction& f, int k);

// Sum over |a| <= k of L1 norms (used by the 2D smallness functionals).
double w_k1_inhomogeneous_norm(const DataFunction& f, int k);

// Sum over |a| <= k of squared L2 norms, square root at the end.  The
// integrand is smooth, so this converges much faster than the L1 family.
double sobolev_l2_norm(const DataFunction& f, int k);

}  // namespace flab
