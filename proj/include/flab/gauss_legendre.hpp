#pragma once

// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
// on the Legendre recurrence and cached per order.

#include <algorithm>
#include <cmath>
#include <vector>

namespace flab {

struct GaussRule {
  std::vector<double> x, w;
};

const GaussRule& gauss_legendre(int n);

[[noreturn]] void throw_nonconverged(double coarse, double fine);

// Integrate a callable over [a, b] with the n-point rule.
template <class F>
double gauss_integrate(F&& f, double a, double b, int n) {
  const GaussRule& r = gauss_legendre(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += r.w[i] * f(mid + half * r.x[i]);
  return s * half;
}

// Doubling driver: integrate with n, 2n, 4n, ... until successive values
// agree to `tol` relative (floored at `scale_floor` absolute).  Throws with
// both values if the cap is reached without agreement.
template <class F>
double gauss_adaptive(F&& f, double a, double b, double tol,
                      double scale_floor = 1.0, int n0 = 8, int cap = 4096) {
  double prev = gauss_integrate(f, a, b, n0);
  for (int n = 2 * n0; n <= cap; n *= 2) {
    const double cur = gauss_integrate(f, a, b, n);
    const double scale = std::max({scale_floor, std::fabs(cur), std::fabs(prev)});
    if (std::fabs(cur - prev) <= tol * scale) return cur;
    prev = cur;
  }
  throw_nonconverged(prev, gauss_integrate(f, a, b, 2 * cap));
}

}  // namespace flab
