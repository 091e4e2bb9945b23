#pragma once

// Run configuration: a strict key = value text format.  '#' starts a
// comment, unknown or duplicate keys are errors, and every effective key
// (given or defaulted) can be echoed back in file syntax, so a run log
// always contains a config that reproduces it.
//
// Bump-family terms are written one per key:
//
//   bg_term1 = smooth 0.5  0 0 0  0.8
//   bg_term2 = poly  -0.2  0.3 0 0  0.5  8
//
// tokens: shape amplitude cx cy cz width [power], shape in {smooth, poly},
// the trailing power only for poly.  Plane-wave modulated terms are an API
// feature only; the file format stays minimal.  Admissibility of the
// background (the smallness functionals against their per-dimension
// thresholds) is enforced at parse time for every experiment that evolves
// or samples it; violations are refused with the computed norm and its
// bound in the message.

#include <cstdint>
#include <string>
#include <vector>

#include "flab/integrator.hpp"

namespace flab {

enum class ExperimentKind {
  GeodesicExactness,   // eps = 0 runs against the exact background, h-ladder
  ConvergenceOrder,    // nonlinear self-convergence across h_list
  StabilityScaling,    // eps_list ladder of perturbed runs
  BoundsAudit,         // pointwise bound audit of the background, no PDE
  DecayProfile,        // single perturbed run, weighted-sup plateau report
  GhostIntegral,       // single perturbed run, dissipation budget report
  IdentitySuite,       // algebraic / quadrature identities, no PDE
};

const char* experiment_kind_name(ExperimentKind k);
ExperimentKind experiment_kind_from(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::IdentitySuite;
  int dim = 2;
  GridKind grid_kind = GridKind::Cartesian;
  double h = 0.125;
  double L = 13.0;
  double T_max = 10.0;
  double cfl_margin = 0.4;
  double solve_margin = 0.05;
  double leak_abort = 1e-8;
  BackgroundSpec background;               // dim and amplitude kept in sync
  DataFunction pert_u0, pert_u1, pert_v0, pert_v1;
  double epsilon = 0.0;
  int rows = 41;               // diagnostic rows spread uniformly over [0, T_max]
  int checkpoint_every = 0;    // steps between checkpoints, 0 = off
  std::vector<double> h_list;     // convergence ladders (geodesic uses h, h/2 if empty)
  std::vector<double> eps_list;   // stability ladder
  std::vector<double> times;      // bounds_audit sample times
  unsigned seed = 1;
  std::string csv_name = "diag";
  std::string summary_name = "summary.txt";
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Every effective key in file syntax, full precision; parsing the echo
// reproduces the config exactly.
std::string config_echo(const ExperimentConfig& cfg);

// FNV-1a over the echo (plus an optional tag naming a sub-run), used to
// bind checkpoints to the config that produced them.
std::uint64_t config_hash(const ExperimentConfig& cfg, const std::string& tag = "");

}  // namespace flab
