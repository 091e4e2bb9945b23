#pragma once

// Source terms of the angular system for unit-sphere maps with the Faddeev
// coupling, written in the (theta, phi) chart:
//
//   box theta = F,  box phi = G,  box = d_t^2 - Laplacian,
//
//   F = -1/2 sin(2 th) Q(ph,ph) - 1/4 sin(2 th) Q_{mn}(th,ph) Q^{mn}(th,ph)
//       - 1/2 cos^2(th) Q_{mn}(ph, Q^{mn}(th,ph))
//   G = sin^2(th) box(ph) + sin(2 th) Q(th,ph)
//       + 1/2 cos^2(th) Q_{mn}(th, Q^{mn}(th,ph))
//
// The nested forms differentiate the inner Q^{mn}(th,ph), so F and G are
// affine in every second derivative; the decomposition below isolates the
// two second-time-derivative slots, which is what makes the system solvable
// for the accelerations node by node.

#include <string>

#include "flab/null_forms.hpp"

namespace flab {

struct FieldJets {
  Jet2 theta, phi;
};

struct SourceTerms {
  double F = 0.0, G = 0.0;
};

// Full right-hand sides; uses every entry of the jets.
SourceTerms source_full(const FieldJets& J, int dim);

// Semilinear truncation: the terms that survive when all second derivatives
// vanish (the quadratic null-form part plus nothing else).
SourceTerms source_semilinear(const FieldJets& J, int dim);

// Exact affine decomposition in the two d_t^2 slots:
//   F = bF + m00 th_tt + m01 ph_tt,   G = bG + m10 th_tt + m11 ph_tt,
// with the remaining jet entries held fixed.  The tt slots of J are ignored.
struct Principal {
  double m00 = 0, m01 = 0, m10 = 0, m11 = 0;
  double bF = 0, bG = 0;
};
Principal principal_decomposition(FieldJets J, int dim);

double principal_spectral_norm(const Principal& p);

// Solve th_tt = lap_th + F, ph_tt = lap_ph + G for the accelerations.
// `margin` is the required distance of ||m|| from 1; crossing it throws,
// and `where` is prepended to the message so callers can name the node.
struct Accelerations {
  double theta_tt = 0.0, phi_tt = 0.0;
  double m_norm = 0.0;
};
Accelerations solve_accelerations(const FieldJets& J, double lap_th, double lap_ph,
                                  int dim, double margin, const std::string& where = "");

// Per-node hyperbolicity margin: distance from the three failure modes
// (principal norm reaching 1, the time-derivative bound on the background,
// the chart boundary |theta| = pi/2).
double node_margin(double theta_val, double m_norm, double bg_theta_t);

}  // namespace flab
