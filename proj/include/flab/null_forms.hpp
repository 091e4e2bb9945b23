#pragma once

// Null forms on space-time first-derivative vectors and the algebraic
// identities that expose their null structure through the good derivatives
//   T_mu = omega_mu d_t + d_mu,   omega_0 = -1, omega_i = x_i / r.
// Index 0 is time throughout; spatial indices run 1..dim.

#include <array>
#include <utility>

namespace flab {

// Full second-order jet of a scalar field at one space-time point.
struct Jet2 {
  double val = 0.0;
  std::array<double, 4> d1{};                    // (d_t, d_1, .., d_dim)
  std::array<std::array<double, 4>, 4> d2{};     // symmetric
};

inline double minkowski_sign(int mu) { return mu == 0 ? 1.0 : -1.0; }

// Q(f,g) = d_t f d_t g - grad f . grad g
double null_q(const std::array<double, 4>& f, const std::array<double, 4>& g, int dim);
// Q_{mu nu}(f,g) = d_mu f d_nu g - d_nu f d_mu g
double null_qmn(const std::array<double, 4>& f, const std::array<double, 4>& g,
                int mu, int nu);
// Index-raised version, signs from the metric diag(+,-,..,-).
double null_qup(const std::array<double, 4>& f, const std::array<double, 4>& g,
                int mu, int nu, int dim);

// omega vector at a spatial point (needs r > 0).
std::array<double, 4> omega_at(const double* x, int dim);

// T_mu f from the first-derivative vector and omega.
double good_deriv(const std::array<double, 4>& f, const std::array<double, 4>& om, int mu);

// Maximum relative residual of the two decomposition identities
//   Q(u,v)      = T_mu u d^mu v - omega_mu d_t u T^mu v
//   Q_{mu nu}(u,v) = T_mu u d_nu v - T_nu u d_mu v
//                    - omega_mu d_t u T_nu v + omega_nu d_t u T_mu v
// over a batch of pseudorandom jets and base points.  Returns the pair
// (worst Q residual, worst Q_{mu nu} residual).
std::pair<double, double> null_identity_residual(int dim, unsigned seed);

// Pointwise null estimate: |Q(f,g)| and all |Q_{mu nu}(f,g)| are bounded by
//   2 (dim+1) (|Df||Tg| + |Tf||Dg|).
// Returns the worst ratio bound/|form| ... >= 1 means the bound holds.
double null_estimate_worst_margin(int dim, unsigned seed, int trials);

}  // namespace flab
