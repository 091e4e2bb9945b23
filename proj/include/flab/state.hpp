#pragma once

// Evolution state: the (theta, phi) pair with velocities, the co-evolved
// linear background on the same grid, and a short uniform-spacing history
// ring that supplies time derivatives to the symmetry-field diagnostics.

#include <cstddef>
#include <deque>

#include "flab/grid.hpp"

namespace flab {

struct StateSnapshot {
  double t = 0.0;
  ScalarField theta, theta_t, phi, phi_t;

  explicit StateSnapshot(const Grid& g, double t0 = 0.0)
      : t(t0), theta(g), theta_t(g), phi(g), phi_t(g) {}
};

// Grid samples of the background Theta and its time derivative, advanced by
// the same integrator with the linear wave right-hand side.  Keeping the
// background on the grid makes the geodesic state an exact equilibrium of
// the discrete system; the closed-form evaluator seeds it and cross-checks
// it in the measurement experiments.
struct BackgroundState {
  ScalarField bg, bg_t;

  explicit BackgroundState(const Grid& g) : bg(g), bg_t(g) {}
};

// Ring of the last few steps at uniform dt (newest last).  Five levels feed
// the degree-4 interpolant differentiation used by the Gamma-word machinery.
class StateHistory {
 public:
  static constexpr std::size_t kDepth = 5;

  void push(const StateSnapshot& s, const BackgroundState& b);
  void clear();

  std::size_t size() const { return snaps_.size(); }
  bool full() const { return snaps_.size() == kDepth; }
  double spacing() const { return dt_; }

  // k = 0 is the oldest retained level.
  const StateSnapshot& snap(std::size_t k) const { return snaps_.at(k); }
  const BackgroundState& background(std::size_t k) const { return bgs_.at(k); }

  // Points every retained field at `g` (checkpoint restore re-homes the
  // history onto the simulation's own grid instance).
  void rebind_grid(const Grid& g);

 private:
  std::deque<StateSnapshot> snaps_;
  std::deque<BackgroundState> bgs_;
  double dt_ = 0.0;
};

}  // namespace flab
