#include "flab/stencils.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace flab {

std::vector<double> fornberg_weights(double x0, const std::vector<double>& z, int m) {
  // B. Fornberg, "Generation of finite difference formulas on arbitrarily
  // spaced grids", Math. Comp. 51 (1988).
  const int n = static_cast<int>(z.size()) - 1;
  if (n < m) throw std::runtime_error("fornberg_weights: not enough nodes");
  std::vector<std::vector<double>> c(n + 1, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = z[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = z[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = z[i] - z[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int i = 0; i <= n; ++i) w[i] = c[i][m];
  return w;
}

const StencilRow& stencil_row(int i, int n, int deriv_order) {
  if (n < 5) throw std::runtime_error("stencil_row: line has fewer than 5 nodes");
  // Edge rows take up to 6 nodes from their end of the line (all 5 when the
  // line is minimal); everything else is the centered 5-point row.
  const bool interior = (i >= 2 && i <= n - 3);
  const int span = std::min(6, n);
  static std::map<std::tuple<int, int, int, int>, StencilRow> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);

  std::tuple<int, int, int, int> key;
  if (interior)
    key = {2, 0, 0, deriv_order};
  else if (i < 2)
    key = {0, i, span, deriv_order};
  else
    key = {1, n - 1 - i, span, deriv_order};  // mirror class, start n-span

  auto it = cache.find(key);
  if (it == cache.end()) {
    StencilRow row;
    std::vector<double> z;
    if (interior) {
      row.start = -2;  // relative to i
      for (int k = -2; k <= 2; ++k) z.push_back(k);
      row.w = fornberg_weights(0.0, z, deriv_order);
    } else {
      for (int k = 0; k < span; ++k) z.push_back(k);
      const double x0 = (i < 2) ? i : span - 1 - (n - 1 - i);
      row.w = fornberg_weights(x0, z, deriv_order);
      row.start = (i < 2) ? 0 : n - span;
      row.start -= i;  // store relative to i, matching the interior rows
    }
    it = cache.emplace(key, std::move(row)).first;
  }
  return it->second;
}

const std::vector<double>& centered5_weights(int deriv_order) {
  static const std::vector<double> w1 =
      fornberg_weights(0.0, {-2, -1, 0, 1, 2}, 1);
  static const std::vector<double> w2 =
      fornberg_weights(0.0, {-2, -1, 0, 1, 2}, 2);
  return deriv_order == 1 ? w1 : w2;
}

}  // namespace flab
