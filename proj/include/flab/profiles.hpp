#pragma once

// Compactly supported initial-data profiles.  A DataFunction is a finite sum
// of radial bumps (optionally modulated by a plane-wave cosine); every term
// vanishes identically outside a ball, so the whole function has compact
// support and as much smoothness as the profile provides.
//
// Two profile shapes:
//   SmoothBump : exp(1 - 1/(1 - s)),  s = |x-c|^2/w^2 < 1   (C-infinity)
//   PolyBump   : (1 - s)^p                                   (C^{p-1})

#include <array>
#include <vector>

#include "flab/taylor.hpp"

namespace flab {

enum class ProfileKind { SmoothBump, PolyBump };

struct BumpTerm {
  ProfileKind kind = ProfileKind::SmoothBump;
  int poly_power = 8;                    // PolyBump exponent
  double amplitude = 1.0;
  std::array<double, 3> center{0, 0, 0};
  double width = 1.0;
  bool modulated = false;                // multiply by cos(k.x + phase)
  std::array<double, 3> wavevec{0, 0, 0};
  double phase = 0.0;
};

struct DataFunction {
  int dim = 3;
  std::vector<BumpTerm> terms;

  double operator()(const double* x) const;
  // Full Taylor jet about x, all partials up to `order`.
  Jet jet(const double* x, int order) const;
  // Radius of a ball about the origin containing the support.
  double support_radius() const;
  bool purely_radial_terms() const;      // no modulation on any term
};

// Scalar profile g(s^2-argument form): value of the term shape as a function
// of the squared relative radius q = s^2/w^2, with derivatives in q.
Jet profile_q_jet(const BumpTerm& term, double q, int order);

// The term shape as a univariate function of the radius s (not squared),
// with derivatives up to `order`.  Used by the radial wave reductions.
Jet radial_term_jet(const BumpTerm& term, double s, int order);

// Convenience: value and first two radial derivatives of the whole radial
// DataFunction at radius s from the origin (requires purely radial terms
// centered at the origin).
struct RadialEval {
  double g, gp, gpp;
};
RadialEval radial_eval(const DataFunction& f, double s);

}  // namespace flab
