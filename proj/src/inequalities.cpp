#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "flab/vector_fields.hpp"
#include "gamma_internal.hpp"

namespace flab {
namespace detail {

double family_value(const std::vector<MovingBump>& bumps, int dim, double t,
                    const double* x) {
  double val = 0.0;
  for (const auto& b : bumps) {
    double q = 0.0;
    for (int a = 0; a < dim; ++a) {
      const double d = x[a] - b.c0[a] - b.vel[a] * t;
      q += d * d;
    }
    q /= b.width * b.width;
    if (q >= 1.0) continue;
    if (b.smooth)
      val += b.amp * std::exp(1.0 - 1.0 / (1.0 - q));
    else {
      const double f = 1.0 - q;
      const double f2 = f * f, f4 = f2 * f2;
      val += b.amp * f4 * f4;
    }
  }
  return val;
}

std::vector<MovingBump> draw_member(std::mt19937& rng, int dim, bool smooth) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<MovingBump> bumps(3);
  for (auto& b : bumps) {
    b.smooth = smooth;
    b.amp = (uni(rng) < 0.5 ? -1.0 : 1.0) * (0.3 + 0.7 * uni(rng));
    b.width = 0.3 + 0.6 * uni(rng);
    const double cmax = 1.0 - b.width;  // support inside the unit ball at t = 0
    for (;;) {
      double rr = 0.0;
      for (int a = 0; a < dim; ++a) {
        b.c0[a] = cmax * (2.0 * uni(rng) - 1.0);
        rr += b.c0[a] * b.c0[a];
      }
      if (rr <= cmax * cmax) break;
    }
    for (;;) {
      double rr = 0.0;
      for (int a = 0; a < dim; ++a) {
        b.vel[a] = 0.8 * (2.0 * uni(rng) - 1.0);
        rr += b.vel[a] * b.vel[a];
      }
      if (rr <= 0.64) break;
    }
  }
  return bumps;
}

double family_support_radius(const std::vector<MovingBump>& bumps, int dim, double t) {
  double r = 0.0;
  for (const auto& b : bumps) {
    double cc = 0.0;
    for (int a = 0; a < dim; ++a) {
      const double c = b.c0[a] + b.vel[a] * t;
      cc += c * c;
    }
    r = std::max(r, std::sqrt(cc) + b.width);
  }
  return r;
}

// Sum of squared L2 norms of all word images with |a| <= depth.
void ks_norm_walk(const SpacetimeSlab& s, int len, int depth, const NodeGeom& geom,
                  double& sum) {
  const Grid& g = s.grid();
  double l2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    l2 += s.level(2).v[i] * s.level(2).v[i] * g.node_weight(i);
  sum += l2;
  if (len == depth) return;
  const int N = gamma_alphabet_size(g.dim);
  for (int gen = 0; gen < N; ++gen)
    ks_norm_walk(apply_gen_geom(s, gen, geom), len + 1, depth, geom, sum);
}

}  // namespace detail

using namespace detail;

RatioStats inequality_harness(InequalityKind kind, int dim, const Grid& grid,
                              const std::vector<double>& times, int family_size,
                              unsigned seed) {
  if (family_size <= 0 || times.empty())
    throw std::runtime_error("inequality_harness: empty test family");
  if (grid.dim != dim)
    throw std::runtime_error("inequality_harness: grid dimension mismatch");
  std::mt19937 rng(seed);
  const NodeGeom geom(grid);
  const int ks_depth = dim / 2 + 1;  // smallest integer k > n/2
  const double dt_slab = 0.5 * grid.h;
  RatioStats stats;
  double ratio_sum = 0.0;
  for (int m = 0; m < family_size; ++m) {
    const auto bumps = draw_member(rng, dim, false);
    for (double t : times) {
      const double sup_r = family_support_radius(bumps, dim, t);
      if (sup_r > grid.L - 2.0 * grid.h)
        throw std::runtime_error(
            "inequality_harness: family support radius " + std::to_string(sup_r) +
            " at t = " + std::to_string(t) + " exceeds the grid (L = " +
            std::to_string(grid.L) + "); enlarge the box");
      const auto fn = [&](double tt, const double* x) {
        return family_value(bumps, dim, tt, x);
      };
      const SpacetimeSlab slab = slab_from_function(grid, fn, t, dt_slab);
      const std::size_t n = grid.size();
      double ratio = 0.0;
      if (kind == InequalityKind::KlainermanSobolev) {
        double lhs = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double r = geom.r[i];
          const double w = std::pow(1.0 + (t + r) * (t + r), 0.25 * (dim - 1)) *
                           std::sqrt(std::sqrt(1.0 + (t - r) * (t - r)));
          lhs = std::max(lhs, w * std::fabs(slab.level(2).v[i]));
        }
        double rhs_sq = 0.0;
        ks_norm_walk(slab, 0, ks_depth, geom, rhs_sq);
        const double rhs = std::sqrt(rhs_sq);
        ratio = rhs > 0.0 ? lhs / rhs : 0.0;
      } else if (kind == InequalityKind::Hardy) {
        double lhs_sq = 0.0, rhs_sq = 0.0;
        std::array<ScalarField, 3> sd{ScalarField(grid), ScalarField(grid),
                                      ScalarField(grid)};
        for (int a = 1; a <= dim; ++a) sd[a - 1] = fd_derivative(slab.level(2), a, 1);
        for (std::size_t i = 0; i < n; ++i) {
          const double w = grid.node_weight(i);
          const double sig = t - geom.r[i];
          const double uu = slab.level(2).v[i];
          lhs_sq += uu * uu / (1.0 + sig * sig) * w;
          double gg = 0.0;
          for (int a = 0; a < dim; ++a) gg += sd[a].v[i] * sd[a].v[i];
          rhs_sq += gg * w;
        }
        ratio = rhs_sq > 0.0 ? std::sqrt(lhs_sq / rhs_sq) : 0.0;
      } else {
        // Pointwise decay estimates: both need every first-order word image.
        const int N = gamma_alphabet_size(dim);
        std::vector<ScalarField> words;
        words.reserve(N);
        for (int gen = 0; gen < N; ++gen)
          words.push_back(apply_gen_geom(slab, gen, geom).level(2));
        const ScalarField dtc = center_dt(slab);
        std::array<ScalarField, 3> sd{ScalarField(grid), ScalarField(grid),
                                      ScalarField(grid)};
        for (int a = 1; a <= dim; ++a) sd[a - 1] = fd_derivative(slab.level(2), a, 1);
        double gmax = 0.0;
        std::vector<double> gmag(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          double s2 = 0.0;
          for (const auto& wf : words) s2 += wf.v[i] * wf.v[i];
          gmag[i] = std::sqrt(s2);
          gmax = std::max(gmax, gmag[i]);
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (gmag[i] <= 1e-13 * gmax) continue;  // zero-over-zero convention
          const double r = geom.r[i];
          double lhs;
          double weight;
          if (kind == InequalityKind::Decay11) {
            double d2 = dtc.v[i] * dtc.v[i];
            for (int a = 0; a < dim; ++a) d2 += sd[a].v[i] * sd[a].v[i];
            lhs = std::sqrt(d2);
            weight = std::sqrt(1.0 + (t - r) * (t - r));
          } else {
            if (r < 2.0 * grid.h) continue;  // ray direction degenerates
            double t2 = 0.0;
            for (int a = 0; a < dim; ++a) {
              const double ta = geom.x[a][i] / r * dtc.v[i] + sd[a].v[i];
              t2 += ta * ta;
            }
            lhs = std::sqrt(t2);
            weight = std::sqrt(1.0 + (t + r) * (t + r));
          }
          ratio = std::max(ratio, lhs * weight / gmag[i]);
        }
      }
      stats.max_ratio = std::max(stats.max_ratio, ratio);
      ratio_sum += ratio;
      ++stats.samples;
    }
  }
  stats.mean_ratio = ratio_sum / stats.samples;
  return stats;
}

}  // namespace flab
