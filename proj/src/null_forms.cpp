#include "flab/null_forms.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace flab {

double null_q(const std::array<double, 4>& f, const std::array<double, 4>& g, int dim) {
  double s = f[0] * g[0];
  for (int i = 1; i <= dim; ++i) s -= f[i] * g[i];
  return s;
}

double null_qmn(const std::array<double, 4>& f, const std::array<double, 4>& g,
                int mu, int nu) {
  return f[mu] * g[nu] - f[nu] * g[mu];
}

double null_qup(const std::array<double, 4>& f, const std::array<double, 4>& g,
                int mu, int nu, int dim) {
  (void)dim;
  return minkowski_sign(mu) * minkowski_sign(nu) * null_qmn(f, g, mu, nu);
}

std::array<double, 4> omega_at(const double* x, int dim) {
  double r2 = 0.0;
  for (int i = 0; i < dim; ++i) r2 += x[i] * x[i];
  const double r = std::sqrt(r2);
  if (!(r > 0.0)) throw std::runtime_error("omega_at: needs r > 0");
  std::array<double, 4> om{-1.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < dim; ++i) om[i + 1] = x[i] / r;
  return om;
}

double good_deriv(const std::array<double, 4>& f, const std::array<double, 4>& om, int mu) {
  return om[mu] * f[0] + f[mu];
}

std::pair<double, double> null_identity_residual(int dim, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  double worst_q = 0.0, worst_qmn = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    double x[3];
    double r2 = 0.0;
    do {
      r2 = 0.0;
      for (int i = 0; i < dim; ++i) {
        x[i] = 2.0 * uni(rng);
        r2 += x[i] * x[i];
      }
    } while (r2 < 1e-4);
    const auto om = omega_at(x, dim);
    std::array<double, 4> u{}, v{};
    for (int mu = 0; mu <= dim; ++mu) {
      u[mu] = uni(rng);
      v[mu] = uni(rng);
    }

    // T^mu carries the metric signs; omega_mu d_t u T^mu v likewise.
    double rhs_q = 0.0;
    for (int mu = 0; mu <= dim; ++mu) {
      rhs_q += good_deriv(u, om, mu) * minkowski_sign(mu) * v[mu];
      rhs_q -= om[mu] * u[0] * minkowski_sign(mu) * good_deriv(v, om, mu);
    }
    const double q = null_q(u, v, dim);
    const double scale_q = std::max({1.0, std::fabs(q), std::fabs(rhs_q)});
    worst_q = std::max(worst_q, std::fabs(q - rhs_q) / scale_q);

    for (int mu = 0; mu <= dim; ++mu)
      for (int nu = 0; nu <= dim; ++nu) {
        const double rhs = good_deriv(u, om, mu) * v[nu] - good_deriv(u, om, nu) * v[mu]
                           - om[mu] * u[0] * good_deriv(v, om, nu)
                           + om[nu] * u[0] * good_deriv(v, om, mu);
        const double lhs = null_qmn(u, v, mu, nu);
        const double scale = std::max({1.0, std::fabs(lhs), std::fabs(rhs)});
        worst_qmn = std::max(worst_qmn, std::fabs(lhs - rhs) / scale);
      }
  }
  return {worst_q, worst_qmn};
}

double null_estimate_worst_margin(int dim, unsigned seed, int trials) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < trials; ++trial) {
    double x[3];
    double r2 = 0.0;
    do {
      r2 = 0.0;
      for (int i = 0; i < dim; ++i) {
        x[i] = 2.0 * uni(rng);
        r2 += x[i] * x[i];
      }
    } while (r2 < 1e-4);
    const auto om = omega_at(x, dim);
    std::array<double, 4> u{}, v{};
    for (int mu = 0; mu <= dim; ++mu) {
      u[mu] = uni(rng);
      v[mu] = uni(rng);
    }
    double du = 0.0, dv = 0.0, tu = 0.0, tv = 0.0;
    for (int mu = 0; mu <= dim; ++mu) {
      du += u[mu] * u[mu];
      dv += v[mu] * v[mu];
      const double tum = good_deriv(u, om, mu);
      const double tvm = good_deriv(v, om, mu);
      tu += tum * tum;
      tv += tvm * tvm;
    }
    du = std::sqrt(du);
    dv = std::sqrt(dv);
    tu = std::sqrt(tu);
    tv = std::sqrt(tv);
    const double bound = 2.0 * (dim + 1) * (du * tv + tu * dv);

    double biggest = std::fabs(null_q(u, v, dim));
    for (int mu = 0; mu <= dim; ++mu)
      for (int nu = 0; nu <= dim; ++nu)
        biggest = std::max(biggest, std::fabs(null_qmn(u, v, mu, nu)));
    if (biggest == 0.0) continue;
    worst = std::min(worst, bound / biggest);
  }
  return worst;
}

}  // namespace flab
