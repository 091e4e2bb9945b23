#include "flab/faddeev_system.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace flab {

namespace {

// d_alpha of the raised inner form Q^{mu nu}(theta, phi), by the product rule.
double inner_form_derivative(const Jet2& th, const Jet2& ph,
                             int alpha, int mu, int nu) {
  return minkowski_sign(mu) * minkowski_sign(nu) *
         (th.d2[alpha][mu] * ph.d1[nu] + th.d1[mu] * ph.d2[alpha][nu] -
          th.d2[alpha][nu] * ph.d1[mu] - th.d1[nu] * ph.d2[alpha][mu]);
}

}  // namespace

SourceTerms source_full(const FieldJets& J, int dim) {
  const Jet2& th = J.theta;
  const Jet2& ph = J.phi;
  const double s2 = std::sin(2.0 * th.val);
  const double c = std::cos(th.val);
  const double c2 = c * c;

  const double qpp = null_q(ph.d1, ph.d1, dim);
  double qq = 0.0;
  for (int mu = 0; mu <= dim; ++mu)
    for (int nu = 0; nu <= dim; ++nu)
      qq += null_qmn(th.d1, ph.d1, mu, nu) * null_qup(th.d1, ph.d1, mu, nu, dim);

  double nestF = 0.0, nestG = 0.0;
  for (int mu = 0; mu <= dim; ++mu)
    for (int nu = 0; nu <= dim; ++nu) {
      const double dmu = inner_form_derivative(th, ph, mu, mu, nu);
      const double dnu = inner_form_derivative(th, ph, nu, mu, nu);
      nestF += ph.d1[mu] * dnu - ph.d1[nu] * dmu;
      nestG += th.d1[mu] * dnu - th.d1[nu] * dmu;
    }

  double box_ph = ph.d2[0][0];
  for (int i = 1; i <= dim; ++i) box_ph -= ph.d2[i][i];

  SourceTerms out;
  out.F = -0.5 * s2 * qpp - 0.25 * s2 * qq - 0.5 * c2 * nestF;
  out.G = std::sin(th.val) * std::sin(th.val) * box_ph +
          s2 * null_q(th.d1, ph.d1, dim) + 0.5 * c2 * nestG;
  return out;
}

SourceTerms source_semilinear(const FieldJets& J, int dim) {
  const Jet2& th = J.theta;
  const Jet2& ph = J.phi;
  const double s2 = std::sin(2.0 * th.val);
  const double qpp = null_q(ph.d1, ph.d1, dim);
  double qq = 0.0;
  for (int mu = 0; mu <= dim; ++mu)
    for (int nu = 0; nu <= dim; ++nu)
      qq += null_qmn(th.d1, ph.d1, mu, nu) * null_qup(th.d1, ph.d1, mu, nu, dim);
  SourceTerms out;
  out.F = -0.5 * s2 * qpp - 0.25 * s2 * qq;
  out.G = s2 * null_q(th.d1, ph.d1, dim);
  return out;
}

Principal principal_decomposition(FieldJets J, int dim) {
  Principal p;
  J.theta.d2[0][0] = 0.0;
  J.phi.d2[0][0] = 0.0;
  const SourceTerms base = source_full(J, dim);
  p.bF = base.F;
  p.bG = base.G;

  J.theta.d2[0][0] = 1.0;
  const SourceTerms with_th = source_full(J, dim);
  p.m00 = with_th.F - base.F;
  p.m10 = with_th.G - base.G;

  J.theta.d2[0][0] = 0.0;
  J.phi.d2[0][0] = 1.0;
  const SourceTerms with_ph = source_full(J, dim);
  p.m01 = with_ph.F - base.F;
  p.m11 = with_ph.G - base.G;
  return p;
}

double principal_spectral_norm(const Principal& p) {
  const double a = p.m00 * p.m00 + p.m10 * p.m10;
  const double b = p.m01 * p.m01 + p.m11 * p.m11;
  const double c = p.m00 * p.m01 + p.m10 * p.m11;
  const double lam = 0.5 * (a + b + std::sqrt((a - b) * (a - b) + 4.0 * c * c));
  return std::sqrt(std::max(0.0, lam));
}

Accelerations solve_accelerations(const FieldJets& J, double lap_th, double lap_ph,
                                  int dim, double margin, const std::string& where) {
  const Principal p = principal_decomposition(J, dim);
  const double mnorm = principal_spectral_norm(p);
  if (!(mnorm < 1.0 - margin)) {
    std::ostringstream os;
    if (!where.empty()) os << where << ": ";
    os << "acceleration solve lost hyperbolicity: ||m|| = " << mnorm
       << " exceeds 1 - margin = " << (1.0 - margin)
       << " (m = [[" << p.m00 << ", " << p.m01 << "], [" << p.m10 << ", "
       << p.m11 << "]])";
    throw std::runtime_error(os.str());
  }
  // (I - m) acc = (lap_th + bF, lap_ph + bG)
  const double r00 = 1.0 - p.m00, r01 = -p.m01;
  const double r10 = -p.m10, r11 = 1.0 - p.m11;
  const double det = r00 * r11 - r01 * r10;
  const double rhs0 = lap_th + p.bF;
  const double rhs1 = lap_ph + p.bG;
  Accelerations acc;
  acc.theta_tt = (r11 * rhs0 - r01 * rhs1) / det;
  acc.phi_tt = (-r10 * rhs0 + r00 * rhs1) / det;
  acc.m_norm = mnorm;
  return acc;
}

double node_margin(double theta_val, double m_norm, double bg_theta_t) {
  const double c = std::cos(theta_val);
  const double m1 = 1.0 - m_norm;
  const double m2 = c * c * (1.0 - bg_theta_t * bg_theta_t);
  const double m3 = 0.5 * M_PI - std::fabs(theta_val);
  return std::min({m1, m2, m3});
}

}  // namespace flab
