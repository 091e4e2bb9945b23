#include "flab/norms.hpp"

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "flab/gauss_legendre.hpp"

namespace flab {

double lp_norm(const ScalarField& f, double p) {
  if (!(p >= 1.0)) throw std::runtime_error("lp_norm: p must be in [1, inf]");
  const Grid& g = *f.grid;
  if (std::isinf(p)) {
    double m = 0.0;
    for (double x : f.v) m = std::max(m, std::fabs(x));
    return m;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < f.v.size(); ++i)
    acc += g.node_weight(i) * std::pow(std::fabs(f.v[i]), p);
  return std::pow(acc, 1.0 / p);
}

namespace {

// All terms unmodulated and centered at the origin: the profile is invariant
// under rotations, so the volume integral collapses to radius x sphere.
bool radial_about_origin(const DataFunction& f) {
  for (const auto& t : f.terms) {
    if (t.modulated) return false;
    if (t.center[0] != 0.0 || t.center[1] != 0.0 || t.center[2] != 0.0)
      return false;
  }
  return true;
}

// One trapezoid sweep over [-R, R]^dim with n nodes per axis.  `accum` maps
// the order-k jet at a point to the integrand value.  Outer lines run in
// parallel into disjoint slots; the final reduction is serial so the result
// does not depend on the worker count.
double sweep_box(const DataFunction& f, int k, double R, int n,
                 const std::function<double(const Jet&)>& accum) {
  const double h = 2.0 * R / (n - 1);
  std::vector<double> line(n, 0.0);
  if (f.dim == 2) {
#pragma omp parallel for schedule(static)
    for (int iy = 0; iy < n; ++iy) {
      const double wy = (iy == 0 || iy == n - 1) ? 0.5 : 1.0;
      double rowsum = 0.0;
      for (int ix = 0; ix < n; ++ix) {
        const double x[2] = {-R + ix * h, -R + iy * h};
        const double wx = (ix == 0 || ix == n - 1) ? 0.5 : 1.0;
        rowsum += wx * accum(f.jet(x, k));
      }
      line[iy] = wy * rowsum;
    }
    double total = 0.0;
    for (double v : line) total += v;
    return total * h * h;
  }
#pragma omp parallel for schedule(static)
  for (int iz = 0; iz < n; ++iz) {
    const double wz = (iz == 0 || iz == n - 1) ? 0.5 : 1.0;
    double slabsum = 0.0;
    for (int iy = 0; iy < n; ++iy) {
      const double wy = (iy == 0 || iy == n - 1) ? 0.5 : 1.0;
      double rowsum = 0.0;
      for (int ix = 0; ix < n; ++ix) {
        const double x[3] = {-R + ix * h, -R + iy * h, -R + iz * h};
        const double wx = (ix == 0 || ix == n - 1) ? 0.5 : 1.0;
        rowsum += wx * accum(f.jet(x, k));
      }
      slabsum += wy * rowsum;
    }
    line[iz] = wz * slabsum;
  }
  double total = 0.0;
  for (double v : line) total += v;
  return total * h * h * h;
}

// Integral of the integrand over the sphere of radius r (circle in 2D).
// The derivative sums being integrated are not rotation invariant even when
// the profile is, so the angle needs real quadrature.  They are, however,
// invariant under axis permutations and sign flips (the multi-index classes
// are closed under both and the profile is radial), so one octant of the
// sphere carries the whole integral: u = cos(theta) on [0, 1] with a
// Gauss-Legendre rule, phi on [0, pi/2] with midpoints, doubled until the
// value settles to `tol` relative.  In 2D the octant is the arc [0, pi/4].
double sphere_integral(const DataFunction& f, int k, double r, double tol,
                       const std::function<double(const Jet&)>& accum) {
  if (f.dim == 2) {
    auto arc = [&](int na) {
      const double ha = 0.25 * M_PI / na;
      double s = 0.0;
      for (int ia = 0; ia < na; ++ia) {
        const double a = (ia + 0.5) * ha;
        const double x[2] = {r * std::cos(a), r * std::sin(a)};
        s += accum(f.jet(x, k));
      }
      return 8.0 * s * ha;
    };
    double prev = arc(8);
    for (int na = 16; na <= 2048; na *= 2) {
      const double cur = arc(na);
      const double scale = std::max({1e-30, std::fabs(cur), std::fabs(prev)});
      if (std::fabs(cur - prev) <= tol * scale) return cur;
      prev = cur;
    }
    return prev;
  }
  auto octant = [&](int m) {
    const GaussRule& rule = gauss_legendre(m);
    const double hp = 0.5 * M_PI / m;
    double s = 0.0;
    for (int iu = 0; iu < m; ++iu) {
      const double u = 0.5 + 0.5 * rule.x[iu];  // cos(theta) in (0, 1)
      const double sn = std::sqrt(std::max(0.0, 1.0 - u * u));
      double band = 0.0;
      for (int ip = 0; ip < m; ++ip) {
        const double p = (ip + 0.5) * hp;
        const double x[3] = {r * sn * std::cos(p), r * sn * std::sin(p),
                             r * u};
        band += accum(f.jet(x, k));
      }
      s += 0.5 * rule.w[iu] * band * hp;
    }
    return 8.0 * s;
  };
  double prev = octant(8);
  for (int m = 16; m <= 256; m *= 2) {
    const double cur = octant(m);
    const double scale = std::max({1e-30, std::fabs(cur), std::fabs(prev)});
    if (std::fabs(cur - prev) <= tol * scale) return cur;
    prev = cur;
  }
  return prev;
}

struct SettleSpec {
  int n0, n_cap;          // nodes per axis (box) / radial nodes, and caps
  double tol;             // relative settling target between levels
  double tol_loose;       // accepted at the cap (0 disables the fallback)
  double angular_tol;     // per-shell settling target (radial path only)
  bool throw_on_fail;
};

// Gauss-Legendre ladder in the radius over [0, support_radius]; each node
// carries its settled sphere integral.  Node batches run in parallel into
// disjoint slots with a serial weighted reduction, so the result does not
// depend on the worker count.
double refine_radial(const DataFunction& f, int k, const SettleSpec& sp,
                     const std::function<double(const Jet&)>& accum,
                     const char* what) {
  const double R = f.support_radius();
  if (R <= 0.0) return 0.0;
  const int dim = f.dim;
  auto level = [&](int n) {
    const GaussRule& rule = gauss_legendre(n);
    std::vector<double> slot(n, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
      const double r = 0.5 * R * (1.0 + rule.x[i]);
      const double area = (dim == 2) ? r : r * r;
      slot[i] = rule.w[i] * area *
                sphere_integral(f, k, r, sp.angular_tol, accum);
    }
    double s = 0.0;
    for (double v : slot) s += v;
    return 0.5 * R * s;
  };
  int n = sp.n0;
  double prev = level(n);
  double cur = prev;
  bool refined = false;
  while (2 * n <= sp.n_cap) {
    n *= 2;
    cur = level(n);
    refined = true;
    const double scale = std::max({1e-30, std::fabs(cur), std::fabs(prev)});
    if (std::fabs(cur - prev) <= sp.tol * scale) return cur;
    prev = cur;
  }
  const double scale = std::max({1e-30, std::fabs(cur), std::fabs(prev)});
  if (refined && sp.tol_loose > 0.0 &&
      std::fabs(cur - prev) <= sp.tol_loose * scale)
    return cur;
  if (!sp.throw_on_fail) return cur;
  std::ostringstream os;
  os << what << ": quadrature did not converge; successive refinements gave "
     << prev << " and " << cur;
  throw std::runtime_error(os.str());
}

double refine_until_settled(const DataFunction& f, int k, const SettleSpec& sp,
                            const std::function<double(const Jet&)>& accum,
                            const char* what) {
  const double R = f.support_radius() * 1.02 + 1e-9;
  if (radial_about_origin(f)) return refine_radial(f, k, R, sp, accum, what);
  int n = sp.n0;
  double prev = sweep_box(f, k, R, n, accum);
  double cur = prev;
  bool refined = false;
  while (2 * n <= sp.n_cap) {
    n *= 2;
    cur = sweep_box(f, k, R, n, accum);
    refined = true;
    const double scale = std::max({1e-30, std::fabs(cur), std::fabs(prev)});
    if (std::fabs(cur - prev) <= sp.tol * scale) return cur;
    prev = cur;
  }
  const double scale = std::max({1e-30, std::fabs(cur), std::fabs(prev)});
  if (refined && sp.tol_loose > 0.0 &&
      std::fabs(cur - prev) <= sp.tol_loose * scale)
    return cur;
  if (!sp.throw_on_fail) return cur;
  std::ostringstream os;
  os << what << ": quadrature did not converge; successive refinements gave "
     << prev << " and " << cur;
  throw std::runtime_error(os.str());
}

SettleSpec l1_spec(const DataFunction& f) {
  SettleSpec sp;
  if (radial_about_origin(f)) {
    sp.n0 = 64;
    sp.n_cap = (f.dim == 2) ? 8192 : 4096;
  } else {
    sp.n0 = 64;
    sp.n_cap = (f.dim == 2) ? 1024 : 256;
  }
  sp.tol = 1e-4;
  sp.tol_loose = 1e-3;
  sp.angular_tol = 1e-5;
  sp.throw_on_fail = true;
  return sp;
}

}  // namespace

double w_k1_homogeneous_norm(const DataFunction& f, int k) {
  if (k < 0) throw std::runtime_error("w_k1_homogeneous_norm: k must be >= 0");
  const auto& basis = jet_basis(f.dim, k);
  auto accum = [&](const Jet& j) {
    double s = 0.0;
    for (size_t m = 0; m < basis.expo.size(); ++m) {
      const auto& a = basis.expo[m];
      if (a[0] + a[1] + a[2] != k) continue;
      s += std::fabs(j.coeff(m) * basis.factorial_prod[m]);
    }
    return s;
  };
  return refine_until_settled(f, k, l1_spec(f), accum,
                              "w_k1_homogeneous_norm");
}

double w_k1_inhomogeneous_norm(const DataFunction& f, int k) {
  const auto& basis = jet_basis(f.dim, k);
  auto accum = [&](const Jet& j) {
    double s = 0.0;
    for (size_t m = 0; m < basis.expo.size(); ++m)
      s += std::fabs(j.coeff(m) * basis.factorial_prod[m]);
    return s;
  };
  return refine_until_settled(f, k, l1_spec(f), accum,
                              "w_k1_inhomogeneous_norm");
}

double sobolev_l2_norm(const DataFunction& f, int k) {
  const auto& basis = jet_basis(f.dim, k);
  auto accum = [&](const Jet& j) {
    double s = 0.0;
    for (size_t m = 0; m < basis.expo.size(); ++m) {
      const double d = j.coeff(m) * basis.factorial_prod[m];
      s += d * d;
    }
    return s;
  };
  SettleSpec sp;
  if (radial_about_origin(f)) {
    sp.n0 = 32;
    sp.n_cap = (f.dim == 2) ? 4096 : 2048;
  } else {
    sp.n0 = 32;
    sp.n_cap = (f.dim == 2) ? 512 : 128;
  }
  sp.tol = 1e-6;
  sp.tol_loose = 0.0;
  sp.angular_tol = 1e-7;  // squared sums have no kinks; Gauss settles fast
  sp.throw_on_fail = false;
  return std::sqrt(refine_until_settled(f, k, sp, accum, "sobolev_l2_norm"));
}

}  // namespace flab
