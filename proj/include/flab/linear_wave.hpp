#pragma once

// Exact solutions of the homogeneous wave equation with compactly supported
// data, used as the geodesic background.
//
// 3D values come from the spherical-mean (Kirchhoff) formula; 2D values from
// the disc means with the endpoint singularity removed by r = t sin(psi).
// Space-time jets are obtained by differentiating the data inside the means
// (the solution map is linear in the data), plus the radial closed forms
// where the data permit.  Also here: the smallness functionals of the data
// with their admissibility thresholds, and the audit of the sharp pointwise
// bounds that the thresholds imply.

#include <string>
#include <vector>

#include "flab/null_forms.hpp"
#include "flab/profiles.hpp"

namespace flab {

struct BackgroundSpec {
  int dim = 3;
  DataFunction theta0, theta1;   // position and velocity data, support in |x| <= 1
  double amplitude = 1.0;        // scale applied to both
};

struct LambdaNorms {
  double lambda0 = 0.0, lambda1 = 0.0, lambda_reg = 0.0;
  double threshold0 = 0.0, threshold1 = 0.0;   // lambda_reg only needs finiteness
  bool met0 = true, met1 = true, met_reg = true;
  bool all_met() const { return met0 && met1 && met_reg; }
};

// Spherical-mean evaluation, 3D only.  Product quadrature per data term in a
// frame aligned with the term center, polar angle substituted by the chord
// radius; doubled until two refinements agree to `tol` (absolute, floored by
// the term amplitude).  Non-convergence throws with both values.
double kirchhoff_eval(const BackgroundSpec& spec, double t, const double* x,
                      double tol = 1e-8);

// Disc-mean evaluation, 2D only, same accuracy contract.
double poisson2d_eval(const BackgroundSpec& spec, double t, const double* x,
                      double tol = 1e-8);

// Value of the background in either dimension (dispatches to the closed
// radial reduction when possible, else the mean formulas).
double background_value(const BackgroundSpec& spec, double t, const double* x,
                        double tol = 1e-8);

// d_t of the background: the solution with shifted data (theta1, Lap theta0).
double background_dt(const BackgroundSpec& spec, double t, const double* x,
                     double tol = 1e-8);

// Full second-order space-time jet of the background at (t, x).
Jet2 background_jet(const BackgroundSpec& spec, double t, const double* x,
                    double tol = 1e-10);

// Method-of-descent oracle for the 2D evaluator: lift the 2D data to
// z-independent 3D data and evaluate the spherical means directly.
double descent_eval(const BackgroundSpec& spec2d, double t, const double* x,
                    double tol = 1e-8);

// Smallness functionals with the per-dimension admissibility thresholds.
LambdaNorms lambda_norms(const BackgroundSpec& spec);

// 5-point finite-difference residual of the wave operator on exact samples.
double wave_residual_fd(const BackgroundSpec& spec, double t, const double* x,
                        double step = 1e-3);

struct BoundsAudit {
  bool ok = true;
  double bound_value = 0.0, bound_velocity = 0.0;   // the certified sup bounds
  double worst_value = 0.0, worst_velocity = 0.0;   // measured sups
  double margin_value = 0.0, margin_velocity = 0.0; // bound - measured, min over times
  std::string failure;                              // first violation, if any
};
// Checks sup |Theta|, sup |d_t Theta| at each time against the bounds the
// thresholds certify; pre: lambda thresholds met.
BoundsAudit bounds_audit(const BackgroundSpec& spec, const std::vector<double>& times,
                         int samples_per_time = 400, unsigned seed = 1u);

// Residual of the tail reconstruction
//   f(t) = (-1)^m/(m-1)! * integral_t^inf (s-t)^(m-1) f^(m)(s) ds
// for the compactly supported profile f(t) = (1-t^2)^8 on t < 1, checked at
// derivative orders m = 1..4.  Returns the worst |reconstruction - f| over a
// uniform sweep of t in [0, 2] (past the support edge, where both sides must
// vanish).
double tail_reconstruction_residual(int m, int sweep_points = 81);

// Uniform table of background values as a function of distance from a radial
// spec's common center, for fast grid sweeps; interpolate with interp6.
struct RadialTable {
  double d0 = 0.0, step = 0.0;
  std::vector<double> val;
};
RadialTable background_value_table(const BackgroundSpec& spec, double t,
                                   double d_max, double step);
double interp6(const RadialTable& tab, double d);

}  // namespace flab
