#pragma once

// Modified energy densities for the perturbation pair (u, v) riding on a
// background wave: the quadratic density e0, the correction densities
// (etilde0, e1) whose subtraction stays uniformly equivalent to e0 while the
// background keeps its hyperbolicity margin, the pointwise lower bound that
// backs the equivalence, and the ghost dissipation integral.
//
// Every density takes first-order spacetime jets at a single event. The
// ghost flag multiplies by exp(-arctan(sigma)) with sigma = t - r.

#include <array>
#include <cstddef>
#include <string>

#include "flab/state.hpp"
#include "flab/vector_fields.hpp"

namespace flab {

// Value and first partials of one scalar at one event; d[0] is the time
// derivative, unused spatial slots stay zero in 2D.
struct Jet4 {
  double val = 0.0;
  std::array<double, 4> d{};
};

// e0 = (1/2)(|D gu|^2 + |D gv|^2), optionally ghost-weighted.
double density_e0(const Jet4& gu, const Jet4& gv, bool ghost, double sigma);

struct TildeDensities {
  double e_tilde0 = 0.0;
  double e1 = 0.0;
};

// The correction densities. `dim` selects the printed per-dimension variant
// of the second e1 cross term (see equivalence_report_header); `u` and
// `theta` enter through sin/cos of their sum and through their gradients,
// `v` only through its gradient.
TildeDensities density_e_tilde(int dim, const Jet4& u, const Jet4& theta,
                               const Jet4& v, const Jet4& gu, const Jet4& gv,
                               bool ghost, double sigma);

// Exact algebraic lower bound for e0 - e_tilde0:
//   (1/2)|D gu|^2 + (1/2)cos^2(u+theta)|d_t gv|^2
//     + (1/2)cos^2(u+theta)(1 - |d_t theta|^2)|grad gv|^2,
// ghost-weighted when the flag is set. The gap e0 - e_tilde0 - bound equals
// (1/2)cos^2(u+theta)(|grad theta|^2(|d_t gv|^2 + |grad gv|^2)
//   - (grad theta . grad gv)^2), nonnegative by Cauchy-Schwarz irrespective
// of the hyperbolicity margin.
double density_lower_bound(const Jet4& u, const Jet4& theta, const Jet4& gu,
                           const Jet4& gv, bool ghost, double sigma);

struct EquivalenceBand {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  bool pointwise_lower_ok = true;
  std::size_t nodes_used = 0;     // nodes with e0 above the vacuum floor
  std::size_t nodes_skipped = 0;  // below-floor nodes excluded from the band
  // Worst offender when the pointwise bound fails (an implementation bug by
  // construction, never physics): node id, its (t, r), and the shortfall.
  std::string violation_dump;
};

// Evaluates e0 and etilde = etilde0 + e1 at every node for one tracked word
// of u = theta - background and v = phi; the band is min/max of
// (e0 - etilde)/e0 over nodes above the floor 1e-14.
EquivalenceBand equivalence_check(const StateHistory& hist,
                                  const GammaWord& word, bool ghost);

// Integral of p0 = (1/2) e^{-q(sigma)} <sigma>^{-2} (|T gu|^2 + |T gv|^2)
// at the history's center time. Nodes with r < 2h are skipped (the ray
// direction degenerates at the origin), matching ghost_energy.
double ghost_dissipation(const StateHistory& hist, const GammaWord& word);

// One-line provenance note for run artifacts: names the per-dimension e1
// variant so bands from 2D and 3D runs are not naively compared.
std::string equivalence_report_header(int dim);

}  // namespace flab
