// Internals shared by the vector-field machinery, the inequality harnesses,
// and the energy densities. Not installed; include only from src/.
#pragma once

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "flab/grid.hpp"
#include "flab/vector_fields.hpp"

namespace flab {
namespace detail {

constexpr double kPi = 3.14159265358979323846;
constexpr int kMaxWordLen = SpacetimeSlab::kLevels - 2;

struct GenInfo {
  enum Kind { Dt, Dx, Rot, Scale, Boost } kind;
  int i = 0;  // Dx/Boost axis, or first rotation axis (1-based)
  int j = 0;  // second rotation axis
};

inline int rot_count(int dim) { return dim * (dim - 1) / 2; }

GenInfo decode_gen(int id, int dim);

// Cartesian node coordinates, built once per walk.  Radial grids store the
// radius in x[0].
struct NodeGeom {
  int dim = 0;
  bool radial = false;
  std::array<std::vector<double>, 3> x;
  std::vector<double> r;

  explicit NodeGeom(const Grid& g) {
    dim = g.dim;
    radial = g.kind == GridKind::Radial3d;
    const std::size_t n = g.size();
    r.resize(n);
    if (radial) {
      x[0].resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[0][i] = g.coord(0, static_cast<int>(i));
        r[i] = x[0][i];
      }
      return;
    }
    for (int a = 0; a < dim; ++a) x[a].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto iv = g.unindex(i);
      double rr = 0.0;
      for (int a = 0; a < dim; ++a) {
        x[a][i] = g.coord(a, iv[a]);
        rr += x[a][i] * x[a][i];
      }
      r[i] = std::sqrt(rr);
    }
  }
};

// First-derivative weights of the degree-4 interpolant at each of the five
// level positions, unit spacing.
const std::array<std::vector<double>, 5>& level_d1_rows();

// d_t and d_t^2 at the center level only.
ScalarField center_dt(const SpacetimeSlab& s);
ScalarField center_dt2(const SpacetimeSlab& s);

SpacetimeSlab apply_gen_geom(const SpacetimeSlab& s, int gen, const NodeGeom& geom);

// Shared bump-superposition family for the harnesses: compactly supported
// profiles whose centers drift at subluminal speed, so supports stay inside
// |x| <= t + 1 for all t >= 0.
struct MovingBump {
  double amp = 1.0, width = 1.0;
  std::array<double, 3> c0{}, vel{};
  bool smooth = false;  // poly p=8 by default; exp profile for C-infinity
};

double family_value(const std::vector<MovingBump>& bumps, int dim, double t,
                    const double* x);
std::vector<MovingBump> draw_member(std::mt19937& rng, int dim, bool smooth);
double family_support_radius(const std::vector<MovingBump>& bumps, int dim, double t);

// Sum of squared L2 norms of all word images with |a| <= depth.
void ks_norm_walk(const SpacetimeSlab& s, int len, int depth, const NodeGeom& geom,
                  double& sum);

}  // namespace detail
}  // namespace flab
