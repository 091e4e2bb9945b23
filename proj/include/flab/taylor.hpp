#pragma once

// Dense truncated multivariate Taylor arithmetic.  A Jet holds the Taylor
// coefficients of a smooth function about a point, up to a fixed total
// degree, in 1 to 3 variables.  deriv() converts a coefficient back to the
// partial derivative.  Composition with analytic outer functions (exp, sin,
// cos, reciprocal) goes through the usual univariate-series Horner scheme.
//
// Degrees stay small (<= 10 in 2D, <= 8 in 3D), so the dense representation
// with a cached index-product table is both simple and fast enough.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

namespace flab {

struct JetBasis {
  int dim = 0;
  int order = 0;
  std::vector<std::array<int, 3>> expo;       // exponent tuple per monomial
  std::vector<double> factorial_prod;         // a1! a2! a3! per monomial
  std::vector<std::vector<int>> prod;         // prod[i][j] = index of x^i * x^j, -1 if truncated

  int index_of(const std::array<int, 3>& a) const {
    for (size_t k = 0; k < expo.size(); ++k)
      if (expo[k] == a) return static_cast<int>(k);
    return -1;
  }
};

inline const JetBasis& jet_basis(int dim, int order) {
  static std::map<int, std::unique_ptr<JetBasis>> cache;
  const int key = dim * 64 + order;
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;
  if (dim < 1 || dim > 3 || order < 0 || order > 12)
    throw std::runtime_error("jet_basis: unsupported dim/order");

  auto b = std::make_unique<JetBasis>();
  b->dim = dim;
  b->order = order;
  // graded ordering: total degree, then lexicographic
  for (int total = 0; total <= order; ++total) {
    std::array<int, 3> a{0, 0, 0};
    const int d3 = (dim >= 3) ? total : 0;
    for (int k3 = 0; k3 <= d3; ++k3)
      for (int k2 = 0; k2 <= ((dim >= 2) ? total - k3 : 0); ++k2) {
        const int k1 = total - k3 - k2;
        a = {k1, k2, k3};
        b->expo.push_back(a);
        double fp = 1.0;
        for (int ax = 0; ax < 3; ++ax)
          for (int m = 2; m <= a[ax]; ++m) fp *= m;
        b->factorial_prod.push_back(fp);
      }
  }
  const size_t n = b->expo.size();
  b->prod.assign(n, std::vector<int>(n, -1));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      std::array<int, 3> s{b->expo[i][0] + b->expo[j][0],
                           b->expo[i][1] + b->expo[j][1],
                           b->expo[i][2] + b->expo[j][2]};
      if (s[0] + s[1] + s[2] <= order) b->prod[i][j] = b->index_of(s);
    }
  auto& slot = cache[key];
  slot = std::move(b);
  return *slot;
}

class Jet {
 public:
  Jet() = default;
  Jet(int dim, int order) : basis_(&jet_basis(dim, order)), c_(basis_->expo.size(), 0.0) {}

  static Jet constant(int dim, int order, double v) {
    Jet j(dim, order);
    j.c_[0] = v;
    return j;
  }
  // The coordinate function x_axis, expanded about the point where it equals x0.
  static Jet variable(int dim, int order, int axis, double x0) {
    Jet j(dim, order);
    j.c_[0] = x0;
    std::array<int, 3> e{0, 0, 0};
    e[axis] = 1;
    if (order >= 1) j.c_[j.basis_->index_of(e)] = 1.0;
    return j;
  }

  int dim() const { return basis_->dim; }
  int order() const { return basis_->order; }
  double value() const { return c_[0]; }
  double coeff(size_t k) const { return c_[k]; }
  size_t size() const { return c_.size(); }

  double deriv(const std::array<int, 3>& a) const {
    const int k = basis_->index_of(a);
    if (k < 0) throw std::runtime_error("Jet::deriv: order exceeds truncation");
    return c_[k] * basis_->factorial_prod[k];
  }

  Jet& operator+=(const Jet& o) {
    for (size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& x : c_) x *= s;
    return *this;
  }
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, double s) {
    a.c_[0] += s;
    return a;
  }
  friend Jet operator-(Jet a, double s) {
    a.c_[0] -= s;
    return a;
  }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r(a.basis_->dim, a.basis_->order);
    const auto& prod = a.basis_->prod;
    for (size_t i = 0; i < a.c_.size(); ++i) {
      if (a.c_[i] == 0.0) continue;
      const auto& row = prod[i];
      for (size_t j = 0; j < b.c_.size(); ++j) {
        const int k = row[j];
        if (k >= 0) r.c_[k] += a.c_[i] * b.c_[j];
      }
    }
    return r;
  }

  // Composition f(g) given the univariate Taylor coefficients of f about g(0).
  Jet compose(const std::vector<double>& fc) const {
    Jet dg = *this;
    dg.c_[0] = 0.0;
    Jet r = Jet::constant(dim(), order(), fc.back());
    for (int k = static_cast<int>(fc.size()) - 2; k >= 0; --k) r = r * dg + fc[k];
    return r;
  }

 private:
  const JetBasis* basis_ = nullptr;
  std::vector<double> c_;
};

inline Jet jet_exp(const Jet& g) {
  const int K = g.order();
  std::vector<double> fc(K + 1);
  fc[0] = std::exp(g.value());
  for (int k = 1; k <= K; ++k) fc[k] = fc[k - 1] / k;
  return g.compose(fc);
}

inline Jet jet_sin(const Jet& g) {
  const int K = g.order();
  std::vector<double> fc(K + 1);
  const double s = std::sin(g.value()), c = std::cos(g.value());
  double fact = 1.0;
  for (int k = 0; k <= K; ++k) {
    if (k > 0) fact *= k;
    const double base[4] = {s, c, -s, -c};
    fc[k] = base[k % 4] / fact;
  }
  return g.compose(fc);
}

inline Jet jet_cos(const Jet& g) {
  const int K = g.order();
  std::vector<double> fc(K + 1);
  const double s = std::sin(g.value()), c = std::cos(g.value());
  double fact = 1.0;
  for (int k = 0; k <= K; ++k) {
    if (k > 0) fact *= k;
    const double base[4] = {c, -s, -c, s};
    fc[k] = base[k % 4] / fact;
  }
  return g.compose(fc);
}

inline Jet jet_recip(const Jet& g) {
  if (g.value() == 0.0) throw std::runtime_error("jet_recip: reciprocal at zero");
  const int K = g.order();
  std::vector<double> fc(K + 1);
  double p = 1.0 / g.value();
  for (int k = 0; k <= K; ++k) {
    fc[k] = (k % 2 ? -p : p);
    p /= g.value();
  }
  // fc[k] = (-1)^k / g0^{k+1}
  return g.compose(fc);
}

inline Jet jet_ipow(const Jet& g, int m) {
  if (m < 0) return jet_recip(jet_ipow(g, -m));
  Jet r = Jet::constant(g.dim(), g.order(), 1.0);
  Jet base = g;
  while (m > 0) {
    if (m & 1) r = r * base;
    base = base * base;
    m >>= 1;
  }
  return r;
}

}  // namespace flab
