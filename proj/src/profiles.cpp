#include "flab/profiles.hpp"

#include <cmath>
#include <stdexcept>

namespace flab {

namespace {

// Value of the profile shape at squared-relative-radius q (scalar path).
double shape_value(const BumpTerm& t, double q) {
  if (q >= 1.0) return 0.0;
  if (t.kind == ProfileKind::SmoothBump) return std::exp(1.0 - 1.0 / (1.0 - q));
  double base = 1.0 - q, r = 1.0;
  for (int k = 0; k < t.poly_power; ++k) r *= base;
  return r;
}

}  // namespace

double DataFunction::operator()(const double* x) const {
  double sum = 0.0;
  for (const auto& t : terms) {
    double q = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double d = x[i] - t.center[i];
      q += d * d;
    }
    q /= t.width * t.width;
    double v = t.amplitude * shape_value(t, q);
    if (v != 0.0 && t.modulated) {
      double arg = t.phase;
      for (int i = 0; i < dim; ++i) arg += t.wavevec[i] * x[i];
      v *= std::cos(arg);
    }
    sum += v;
  }
  return sum;
}

Jet profile_q_jet(const BumpTerm& term, double q, int order) {
  Jet qj = Jet::variable(1, order, 0, q);
  if (q >= 1.0 - 1e-12) return Jet(1, order);
  if (term.kind == ProfileKind::SmoothBump) {
    // exp(1 - 1/(1-q))
    Jet one_minus = Jet::constant(1, order, 1.0) - qj;
    Jet inv = jet_recip(one_minus);
    Jet arg = Jet::constant(1, order, 1.0) - inv;
    return jet_exp(arg);
  }
  Jet base = Jet::constant(1, order, 1.0) - qj;
  return jet_ipow(base, term.poly_power);
}

Jet radial_term_jet(const BumpTerm& term, double s, int order) {
  if (term.modulated)
    throw std::runtime_error("radial_term_jet: term is not radial (modulated)");
  Jet sj = Jet::variable(1, order, 0, s);
  Jet q = sj * sj * (1.0 / (term.width * term.width));
  if (q.value() >= 1.0 - 1e-12) return Jet(1, order);
  Jet shape = profile_q_jet(term, q.value(), order);
  std::vector<double> fc(shape.size());
  for (size_t k = 0; k < shape.size(); ++k) fc[k] = shape.coeff(k);
  Jet r = q.compose(fc);
  return r * term.amplitude;
}

Jet DataFunction::jet(const double* x, int order) const {
  Jet sum(dim, order);
  for (const auto& t : terms) {
    Jet q(dim, order);
    for (int i = 0; i < dim; ++i) {
      Jet xi = Jet::variable(dim, order, i, x[i] - t.center[i]);
      q += xi * xi;
    }
    q *= 1.0 / (t.width * t.width);
    if (q.value() >= 1.0 - 1e-12) continue;
    Jet shape = profile_q_jet(t, q.value(), order);
    std::vector<double> fc(shape.size());
    for (size_t k = 0; k < shape.size(); ++k) fc[k] = shape.coeff(k);
    Jet term = q.compose(fc) * t.amplitude;
    if (t.modulated) {
      Jet arg = Jet::constant(dim, order, t.phase);
      for (int i = 0; i < dim; ++i)
        arg += Jet::variable(dim, order, i, x[i]) * t.wavevec[i];
      term = term * jet_cos(arg);
    }
    sum += term;
  }
  return sum;
}

double DataFunction::support_radius() const {
  double r = 0.0;
  for (const auto& t : terms) {
    double c = 0.0;
    for (int i = 0; i < dim; ++i) c += t.center[i] * t.center[i];
    r = std::max(r, std::sqrt(c) + t.width);
  }
  return r;
}

bool DataFunction::purely_radial_terms() const {
  for (const auto& t : terms)
    if (t.modulated) return false;
  return true;
}

RadialEval radial_eval(const DataFunction& f, double s) {
  RadialEval out{0.0, 0.0, 0.0};
  for (const auto& t : f.terms) {
    if (t.modulated || t.center != std::array<double, 3>{0, 0, 0})
      throw std::runtime_error("radial_eval: data is not radial about the origin");
    Jet j = radial_term_jet(t, s, 2);
    out.g += j.deriv({0, 0, 0});
    out.gp += j.deriv({1, 0, 0});
    out.gpp += j.deriv({2, 0, 0});
  }
  return out;
}

}  // namespace flab
