#pragma once

// Symmetry vector fields of the wave operator and the diagnostics built on
// them.  The alphabet collects translations d_t, d_1..d_n, the spatial
// rotations Om_ij (i < j), the scaling S = t d_t + x . grad, and the boosts
// L_i = t d_i + x_i d_t; its size is 2 + 2n + n(n-1)/2.  Words over the
// alphabet act on a five-level time slab of grid fields: spatial parts use
// the 4th-order stencils, time parts differentiate the degree-4 polynomial
// through the levels, so a word of length m needs slab accuracy to spare
// (m <= levels - 2).
//
// On radial grids the rotation and boost images of a radial field leave the
// one-dimensional representation, so first-order words are folded in through
// closed-form angular reductions and longer words are restricted to the
// radial-preserving generators {d_t, S}.  Reports carry that policy string.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "flab/state.hpp"

namespace flab {

// ---------------------------------------------------------------- alphabet

// Generator ids, in storage order: 0 = d_t, 1..n = d_i, then rotations
// Om_ij in lexicographic (i, j) order, then S, then L_1..L_n.
int gamma_alphabet_size(int dim);
std::string gamma_generator_name(int id, int dim);

// A word is applied left to right: {d_1, S} means d_1 hits the field first
// and S acts on the result.
struct GammaWord {
  std::vector<int> gens;
};

// Every word of length <= max_len (the empty word first), in prefix order:
// each word appears immediately after its parent, so incremental evaluation
// can reuse the parent slab.
std::vector<GammaWord> gamma_words_upto(int dim, int max_len);

// ------------------------------------------------------------------- slabs

// Five consecutive time levels of one scalar field at uniform spacing.
// Level 2 is the center; diagnostics are evaluated there.
class SpacetimeSlab {
 public:
  static constexpr int kLevels = 5;

  SpacetimeSlab(const Grid& g, double t_center, double dt, int parity = +1);

  ScalarField& level(int l) { return lev_[l]; }
  const ScalarField& level(int l) const { return lev_[l]; }
  double time(int l) const { return t_center_ + (l - 2) * dt_; }
  double t_center() const { return t_center_; }
  double dt() const { return dt_; }
  const Grid& grid() const { return *grid_; }

  // d_t via the degree-4 interpolant, evaluated at every level (exact for
  // polynomials in t up to degree 4).
  SpacetimeSlab time_derivative() const;

 private:
  const Grid* grid_;
  double t_center_, dt_;
  std::vector<ScalarField> lev_;
};

enum class FieldSelect { PertTheta, PertPhi, Background, Theta };

// Slab of the selected field from a full history ring (throws if the ring
// is not full).  PertTheta is theta minus the co-evolved background.
SpacetimeSlab slab_from_history(const StateHistory& hist, FieldSelect which);

// Slab sampled from an analytic space-time function, for the inequality
// harnesses and oracle tests.
SpacetimeSlab slab_from_function(const Grid& g,
                                 const std::function<double(double, const double*)>& f,
                                 double t_center, double dt_slab);

// One generator applied to a slab (all levels).  Radial grids accept only
// d_t and S; other generators throw.
SpacetimeSlab apply_generator(const SpacetimeSlab& s, int gen);

// Full word, left to right.  The slab must have been built with spacing
// fine enough that word.gens.size() <= kLevels - 2; longer words throw with
// the required depth in the message.
ScalarField apply_gamma(const SpacetimeSlab& s, const GammaWord& word);
ScalarField apply_gamma(const StateHistory& hist, FieldSelect which, const GammaWord& word);

// ------------------------------------------------------------- diagnostics

// Everything the per-cadence report needs from one field, computed in a
// single walk of the word tree.  E[k-1] = E_k for k = 1..4 (words of length
// <= k-1), ghost[k-1] likewise, X[k] = X_k for k = 0..3 (words of length
// <= k).  Ghost integrals exclude the ball r < r_min where the ray
// direction degenerates; that ball's possible contribution is bounded by
// its volume times the largest nearby integrand and reported separately.
struct GammaDiagnostics {
  std::array<double, 4> E{};
  std::array<double, 4> ghost{};
  std::array<double, 4> X{};
  double ghost_annulus_bound = 0.0;
  double r_min = 0.0;
  std::string word_policy;
};

GammaDiagnostics gamma_diagnostics(const StateHistory& hist, FieldSelect which);

// Single-value views used by tests and the CLI.
double energy_Ek(const StateHistory& hist, FieldSelect which, int k);
double ghost_energy(const StateHistory& hist, FieldSelect which, int k);
double weighted_sup_Xk(const StateHistory& hist, FieldSelect which, int k);

// Ghost dissipation density integrated over the grid at the current time:
// the instantaneous rate (1/2) integral e^{-q} <t-r>^-2 (|Tu|^2 + |Tv|^2) dx
// at first order, from state velocities directly (no history needed).  The
// runner accumulates it in time by the trapezoid rule and logs the two
// fields in separate files, hence the split view.
struct GhostRateParts {
  double u = 0.0, v = 0.0;
  double total() const { return u + v; }
};
GhostRateParts ghost_dissipation_parts(const StateSnapshot& s, const BackgroundState& b);
double ghost_dissipation_rate(const StateSnapshot& s, const BackgroundState& b);

// -------------------------------------------------------------- harnesses

enum class InequalityKind { KlainermanSobolev, Hardy, Decay11, Decay13 };

struct RatioStats {
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  int samples = 0;
};

// Measures LHS/RHS ratios of the classical estimates over a family of
// analytic test fields (random bump superpositions inside the light cone)
// at the given times.  Zero-over-zero counts as zero.  The returned maximum
// is an empirical constant to be recorded, not asserted against theory.
//   KlainermanSobolev:  <t+r>^((n-1)/2) <t-r>^(1/2) |u|  vs  Gamma-Sobolev
//                       norm of order k (sum over |a| <= k of L2 norms,
//                       root-sum-square), k = floor(n/2) + 1.
//   Hardy:              ||<t-r>^-1 u||_L2  vs  ||grad u||_L2.
//   Decay11:            |Du|  vs  <t-r>^-1 |Gamma u| pointwise.
//   Decay13:            |Tu|  vs  <t+r>^-1 |Gamma u| pointwise.
RatioStats inequality_harness(InequalityKind kind, int dim, const Grid& grid,
                              const std::vector<double>& times, int family_size,
                              unsigned seed);

// --------------------------------------------------------- property checks

// Max-norm residual of the commutator relations on an analytic wave packet
// sampled at spacing h: [box, Om] and [box, L] vanish, [box, S] = 2 box.
// Returned per relation so refinement tests can measure the order.
struct CommutatorResiduals {
  double rotation = 0.0;
  double boost = 0.0;
  double scaling = 0.0;
};
CommutatorResiduals commutator_residuals(int dim, double h);

// Residual of t box u = S d_t u - L_i d_i u on polynomial data where every
// term is exact up to roundoff.
double wave_identity_residual(int dim, unsigned seed);

}  // namespace flab
