#include "flab/grid.hpp"

#include <cmath>
#include <stdexcept>

#include "flab/stencils.hpp"

namespace flab {

Grid make_grid(int dim, double h, double L, GridKind kind) {
  if (dim != 2 && dim != 3) throw std::runtime_error("make_grid: dim must be 2 or 3");
  if (kind == GridKind::Radial3d && dim != 3)
    throw std::runtime_error("make_grid: radial mode is 3D only");
  if (!(h > 0.0) || !(L > 0.0)) throw std::runtime_error("make_grid: h and L must be positive");
  Grid g;
  g.kind = kind;
  g.dim = dim;
  g.h = h;
  const int m = static_cast<int>(std::lround(L / h));
  g.L = m * h;
  g.n_axis = (kind == GridKind::Cartesian) ? 2 * m + 1 : m + 1;
  g.naxes = (kind == GridKind::Cartesian) ? dim : 1;
  if (g.n_axis < 5)
    throw std::runtime_error("make_grid: grid too small, need at least 5 nodes per axis");
  return g;
}

std::size_t Grid::size() const {
  std::size_t s = 1;
  for (int a = 0; a < naxes; ++a) s *= n_axis;
  return s;
}

double Grid::coord(int axis, int i) const {
  (void)axis;
  return (kind == GridKind::Cartesian) ? -L + i * h : i * h;
}

std::size_t Grid::index(const std::array<int, 3>& iv) const {
  std::size_t idx = 0;
  for (int a = naxes - 1; a >= 0; --a) idx = idx * n_axis + iv[a];
  return idx;
}

std::array<int, 3> Grid::unindex(std::size_t idx) const {
  std::array<int, 3> iv{0, 0, 0};
  for (int a = 0; a < naxes; ++a) {
    iv[a] = static_cast<int>(idx % n_axis);
    idx /= n_axis;
  }
  return iv;
}

double Grid::node_weight(std::size_t idx) const {
  const auto iv = unindex(idx);
  if (kind == GridKind::Cartesian) {
    double w = 1.0;
    for (int a = 0; a < naxes; ++a) {
      w *= h;
      if (iv[a] == 0 || iv[a] == n_axis - 1) w *= 0.5;
    }
    return w;
  }
  const double r = coord(0, iv[0]);
  double w = 4.0 * M_PI * r * r * h;
  if (iv[0] == 0 || iv[0] == n_axis - 1) w *= 0.5;
  return w;
}

ScalarField fd_derivative(const ScalarField& f, int axis, int order) {
  const Grid& g = *f.grid;
  if (axis < 1 || axis > g.dim)
    throw std::runtime_error("fd_derivative: axis out of range");
  if (order != 1 && order != 2)
    throw std::runtime_error("fd_derivative: order must be 1 or 2");
  if (g.kind == GridKind::Radial3d && axis != 1)
    throw std::runtime_error("fd_derivative: radial grids have a single axis");
  if (g.n_axis < 5)
    throw std::runtime_error("fd_derivative: grid too small");

  const int a = axis - 1;
  const int n = g.n_axis;
  const double scale = (order == 1) ? 1.0 / g.h : 1.0 / (g.h * g.h);
  const int out_parity = (order == 1) ? -f.parity : f.parity;
  ScalarField out(g, g.kind == GridKind::Radial3d ? out_parity : +1, f.time_tag);

  if (g.kind == GridKind::Radial3d) {
    // Reflect across r = 0 with the field's parity; one-sided at r = L.
    const auto& cw = centered5_weights(order);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      if (i >= n - 2) {
        const StencilRow& row = stencil_row(i, n, order);
        for (size_t k = 0; k < row.w.size(); ++k)
          acc += row.w[k] * f.v[i + row.start + k];
      } else {
        for (int off = -2; off <= 2; ++off) {
          const int j = i + off;
          const double val = (j >= 0) ? f.v[j] : f.parity * f.v[-j];
          acc += cw[off + 2] * val;
        }
      }
      out.v[i] = acc * scale;
    }
    return out;
  }

  // Cartesian: apply the row tables line by line along the chosen axis.
  std::size_t stride = 1;
  for (int ax = 0; ax < a; ++ax) stride *= n;
  std::size_t nlines = g.size() / n;
  for (std::size_t line = 0; line < nlines; ++line) {
    // Base index of this line: expand `line` skipping the differentiated axis.
    std::size_t rem = line, base = 0, mult = 1;
    for (int ax = 0; ax < g.naxes; ++ax) {
      if (ax == a) {
        mult *= n;
        continue;
      }
      base += (rem % n) * mult;
      rem /= n;
      mult *= n;
    }
    for (int i = 0; i < n; ++i) {
      const StencilRow& row = stencil_row(i, n, order);
      double acc = 0.0;
      for (size_t k = 0; k < row.w.size(); ++k)
        acc += row.w[k] * f.v[base + (i + row.start + k) * stride];
      out.v[base + i * stride] = acc * scale;
    }
  }
  return out;
}

}  // namespace flab
