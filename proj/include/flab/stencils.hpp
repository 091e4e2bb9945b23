#pragma once

// Finite-difference weight tables.  Interior rows are the classic 5-point
// centered 4th-order stencils; within two nodes of a boundary the rows
// switch to 6-node shifted stencils that keep at least 4th order.  Weights
// are generated once by Fornberg's recurrence for unit spacing and scaled
// by h^-m at the point of use.

#include <vector>

namespace flab {

// Weights for the m-th derivative at x0 given node offsets z[], unit spacing.
std::vector<double> fornberg_weights(double x0, const std::vector<double>& z, int m);

struct StencilRow {
  int start;                  // first node index the row touches
  std::vector<double> w;      // weights, unit spacing
};

// Row for differentiating a line of n nodes at position i; deriv_order 1 or 2.
// Shared tables, cheap to call repeatedly.
const StencilRow& stencil_row(int i, int n, int deriv_order);

// Centered 5-point interior weights (offsets -2..2), unit spacing.
const std::vector<double>& centered5_weights(int deriv_order);

}  // namespace flab
