#pragma once

// Uniform tensor grids on [-L, L]^dim, plus a radial mode for spherically
// symmetric 3D runs on [0, L].  L is snapped to an integer multiple of h so
// the node set is exact; the snapped value is what size/coordinates use.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace flab {

enum class GridKind { Cartesian, Radial3d };

struct Grid {
  GridKind kind = GridKind::Cartesian;
  int dim = 2;          // spatial dimension of the underlying problem
  double h = 0.1;
  double L = 1.0;       // snapped half-width (radial: outer radius)
  int n_axis = 0;       // nodes per axis
  int naxes = 0;        // storage axes: dim for Cartesian, 1 for Radial3d

  std::size_t size() const;
  double coord(int axis, int i) const;    // axis is 0-based here
  std::size_t index(const std::array<int, 3>& iv) const;
  std::array<int, 3> unindex(std::size_t idx) const;
  // Trapezoid quadrature weight of node idx (includes the 4 pi r^2 factor
  // in radial mode).
  double node_weight(std::size_t idx) const;

  bool operator==(const Grid& o) const {
    return kind == o.kind && dim == o.dim && h == o.h && L == o.L;
  }
};

Grid make_grid(int dim, double h, double L, GridKind kind = GridKind::Cartesian);

struct ScalarField {
  const Grid* grid = nullptr;
  int parity = +1;          // radial mode: +1 even, -1 odd across r = 0
  double time_tag = 0.0;
  std::vector<double> v;

  explicit ScalarField(const Grid& g, int parity_ = +1, double t = 0.0)
      : grid(&g), parity(parity_), time_tag(t), v(g.size(), 0.0) {}
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
};

// 4th-order finite difference along a spatial axis (1-based, per the module
// interface).  order selects first or second derivative.
ScalarField fd_derivative(const ScalarField& f, int axis, int order);

}  // namespace flab
