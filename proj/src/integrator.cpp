#include "flab/integrator.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "flab/faddeev_system.hpp"

namespace flab {

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

void rebind(ScalarField& f, const Grid& g) {
  if (f.v.size() != g.size())
    throw std::runtime_error("field/grid size mismatch while rebinding state");
  f.grid = &g;
}

bool data_radial_about_origin(const DataFunction& f) {
  if (!f.purely_radial_terms()) return false;
  for (const auto& t : f.terms)
    if (t.center[0] != 0.0 || t.center[1] != 0.0 || t.center[2] != 0.0) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------

void StateHistory::push(const StateSnapshot& s, const BackgroundState& b) {
  if (!snaps_.empty()) {
    const double d = s.t - snaps_.back().t;
    if (d <= 0.0)
      throw std::runtime_error("state history: timestamps must strictly increase");
    if (dt_ == 0.0)
      dt_ = d;
    else if (std::fabs(d - dt_) > 1e-9 * std::max(1.0, std::fabs(dt_)))
      throw std::runtime_error("state history: spacing must stay uniform");
  }
  snaps_.push_back(s);
  bgs_.push_back(b);
  if (snaps_.size() > kDepth) {
    snaps_.pop_front();
    bgs_.pop_front();
  }
}

void StateHistory::clear() {
  snaps_.clear();
  bgs_.clear();
  dt_ = 0.0;
}

void StateHistory::rebind_grid(const Grid& g) {
  for (auto& s : snaps_) {
    rebind(s.theta, g);
    rebind(s.theta_t, g);
    rebind(s.phi, g);
    rebind(s.phi_t, g);
  }
  for (auto& b : bgs_) {
    rebind(b.bg, g);
    rebind(b.bg_t, g);
  }
}

// ---------------------------------------------------------------------------

double cfl_dt(const Grid& g, double margin, double hyp) {
  if (hyp <= 0.0) {
    std::ostringstream os;
    os << "cfl_dt: hyperbolicity margin " << hyp << " is not positive";
    throw std::runtime_error(os.str());
  }
  return margin * g.h * std::min(1.0, std::sqrt(hyp));
}

StateDeriv rhs_stage(const StateSnapshot& s, const BackgroundState& bgs,
                     double solve_margin, double* min_margin,
                     BackgroundDeriv* bg_deriv) {
  const Grid& g = *s.theta.grid;
  const int dim = g.dim;
  const std::size_t n = g.size();
  StateDeriv out(g);
  out.theta_dot.v = s.theta_t.v;
  out.phi_dot.v = s.phi_t.v;
  if (bg_deriv) bg_deriv->bg_dot.v = bgs.bg_t.v;

  double worst = 1e300;
  static const std::string here = "rhs_stage";

  if (g.kind == GridKind::Cartesian) {
    // Whole-field stencil sweeps; the node loop below only gathers.
    std::vector<ScalarField> th1, ph1, tht1, pht1, th2, ph2, bg2;
    for (int a = 1; a <= dim; ++a) {
      th1.push_back(fd_derivative(s.theta, a, 1));
      ph1.push_back(fd_derivative(s.phi, a, 1));
      tht1.push_back(fd_derivative(s.theta_t, a, 1));
      pht1.push_back(fd_derivative(s.phi_t, a, 1));
      th2.push_back(fd_derivative(s.theta, a, 2));
      ph2.push_back(fd_derivative(s.phi, a, 2));
      if (bg_deriv) bg2.push_back(fd_derivative(bgs.bg, a, 2));
    }
    // mixed second derivatives: one pair per unordered axis pair
    std::vector<ScalarField> thx, phx;
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < dim; ++a)
      for (int c = a + 1; c < dim; ++c) {
        pairs.emplace_back(a, c);
        thx.push_back(fd_derivative(th1[a], c + 1, 1));
        phx.push_back(fd_derivative(ph1[a], c + 1, 1));
      }

    for (std::size_t i = 0; i < n; ++i) {
      FieldJets J;
      J.theta.val = s.theta[i];
      J.phi.val = s.phi[i];
      J.theta.d1[0] = s.theta_t[i];
      J.phi.d1[0] = s.phi_t[i];
      double lap_th = 0.0, lap_ph = 0.0;
      for (int a = 0; a < dim; ++a) {
        J.theta.d1[a + 1] = th1[a][i];
        J.phi.d1[a + 1] = ph1[a][i];
        J.theta.d2[0][a + 1] = J.theta.d2[a + 1][0] = tht1[a][i];
        J.phi.d2[0][a + 1] = J.phi.d2[a + 1][0] = pht1[a][i];
        J.theta.d2[a + 1][a + 1] = th2[a][i];
        J.phi.d2[a + 1][a + 1] = ph2[a][i];
        lap_th += th2[a][i];
        lap_ph += ph2[a][i];
      }
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const int a = pairs[p].first + 1, c = pairs[p].second + 1;
        J.theta.d2[a][c] = J.theta.d2[c][a] = thx[p][i];
        J.phi.d2[a][c] = J.phi.d2[c][a] = phx[p][i];
      }
      const Accelerations acc =
          solve_accelerations(J, lap_th, lap_ph, dim, solve_margin, here);
      out.theta_t_dot[i] = acc.theta_tt;
      out.phi_t_dot[i] = acc.phi_tt;
      if (min_margin) {
        const double m = node_margin(s.theta[i], acc.m_norm, bgs.bg_t[i]);
        if (m < worst) worst = m;
      }
      if (bg_deriv) {
        double lap_bg = 0.0;
        for (int a = 0; a < dim; ++a) lap_bg += bg2[a][i];
        bg_deriv->bg_t_dot[i] = lap_bg;
      }
    }
  } else {
    // Radially symmetric 3D: assemble the jet at the representative point
    // (r, 0, 0); tangential curvature enters through the transverse diagonal
    // entries u_r / r (limit u_rr at the origin).
    const ScalarField th_r = fd_derivative(s.theta, 1, 1);
    const ScalarField th_rr = fd_derivative(s.theta, 1, 2);
    const ScalarField tht_r = fd_derivative(s.theta_t, 1, 1);
    const ScalarField ph_r = fd_derivative(s.phi, 1, 1);
    const ScalarField ph_rr = fd_derivative(s.phi, 1, 2);
    const ScalarField pht_r = fd_derivative(s.phi_t, 1, 1);
    ScalarField bg_rr(g);
    if (bg_deriv) {
      const ScalarField bg_r = fd_derivative(bgs.bg, 1, 1);
      const ScalarField bg_rr0 = fd_derivative(bgs.bg, 1, 2);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = g.coord(0, static_cast<int>(i));
        const double tang = (i == 0) ? bg_rr0[i] : bg_r[i] / r;
        bg_rr[i] = bg_rr0[i] + 2.0 * tang;  // radial Laplacian
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double r = g.coord(0, static_cast<int>(i));
      FieldJets J;
      J.theta.val = s.theta[i];
      J.phi.val = s.phi[i];
      J.theta.d1[0] = s.theta_t[i];
      J.phi.d1[0] = s.phi_t[i];
      J.theta.d1[1] = th_r[i];
      J.phi.d1[1] = ph_r[i];
      J.theta.d2[0][1] = J.theta.d2[1][0] = tht_r[i];
      J.phi.d2[0][1] = J.phi.d2[1][0] = pht_r[i];
      J.theta.d2[1][1] = th_rr[i];
      J.phi.d2[1][1] = ph_rr[i];
      const double th_tang = (i == 0) ? th_rr[i] : th_r[i] / r;
      const double ph_tang = (i == 0) ? ph_rr[i] : ph_r[i] / r;
      J.theta.d2[2][2] = J.theta.d2[3][3] = th_tang;
      J.phi.d2[2][2] = J.phi.d2[3][3] = ph_tang;
      const double lap_th = th_rr[i] + 2.0 * th_tang;
      const double lap_ph = ph_rr[i] + 2.0 * ph_tang;
      const Accelerations acc =
          solve_accelerations(J, lap_th, lap_ph, 3, solve_margin, here);
      out.theta_t_dot[i] = acc.theta_tt;
      out.phi_t_dot[i] = acc.phi_tt;
      if (min_margin) {
        const double m = node_margin(s.theta[i], acc.m_norm, bgs.bg_t[i]);
        if (m < worst) worst = m;
      }
      if (bg_deriv) bg_deriv->bg_t_dot[i] = bg_rr[i];
    }
  }
  if (min_margin) *min_margin = worst;
  return out;
}

// ---------------------------------------------------------------------------

Simulation::Simulation(const EvolveConfig& cfg)
    : grid_(cfg.grid),
      spec_(cfg.background),
      y_(grid_),
      b_(grid_),
      eps_(cfg.epsilon),
      solve_margin_(cfg.solve_margin),
      leak_abort_(cfg.leak_abort),
      wall_start_(now_seconds()) {
  if (grid_.dim != spec_.dim)
    throw std::runtime_error("Simulation: grid and background dimension differ");
  if (grid_.kind == GridKind::Radial3d) {
    if (!(data_radial_about_origin(spec_.theta0) && data_radial_about_origin(spec_.theta1)))
      throw std::runtime_error(
          "Simulation: radial mode needs background data radial about the origin");
    if (eps_ != 0.0 &&
        !(data_radial_about_origin(cfg.pert_u0) && data_radial_about_origin(cfg.pert_u1) &&
          data_radial_about_origin(cfg.pert_v0) && data_radial_about_origin(cfg.pert_v1)))
      throw std::runtime_error(
          "Simulation: radial mode needs perturbation data radial about the origin");
  }

  // Initial data: theta carries the background plus the scaled bump family.
  const std::size_t n = grid_.size();
  for (std::size_t i = 0; i < n; ++i) {
    double x[3] = {0.0, 0.0, 0.0};
    if (grid_.kind == GridKind::Radial3d) {
      x[0] = grid_.coord(0, static_cast<int>(i));
    } else {
      const auto iv = grid_.unindex(i);
      for (int a = 0; a < grid_.dim; ++a) x[a] = grid_.coord(a, iv[a]);
    }
    const double bg0 = spec_.amplitude * spec_.theta0(x);
    const double bg1 = spec_.amplitude * spec_.theta1(x);
    b_.bg[i] = bg0;
    b_.bg_t[i] = bg1;
    y_.theta[i] = bg0 + eps_ * cfg.pert_u0(x);
    y_.theta_t[i] = bg1 + eps_ * cfg.pert_u1(x);
    y_.phi[i] = eps_ * cfg.pert_v0(x);
    y_.phi_t[i] = eps_ * cfg.pert_v1(x);
  }

  // Boundary ring and the initial containment check.
  if (grid_.kind == GridKind::Radial3d) {
    ring_.push_back(n - 1);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const auto iv = grid_.unindex(i);
      for (int a = 0; a < grid_.dim; ++a)
        if (iv[a] == 0 || iv[a] == grid_.n_axis - 1) {
          ring_.push_back(i);
          break;
        }
    }
  }
  zero_boundary_and_monitor();
  if (last_leak_ > leak_abort_)
    throw std::runtime_error("Simulation: initial data reaches the boundary ring");

  // Fixed step from the initial hyperbolicity margin.
  rhs_stage(y_, b_, solve_margin_, &hyp0_, nullptr);
  dt_ = cfl_dt(grid_, cfg.cfl_margin, hyp0_);
  last_margin_ = hyp0_;
  hist_.push(y_, b_);
}

void Simulation::zero_boundary_and_monitor() {
  double worst = 0.0;
  ScalarField* fields[6] = {&y_.theta, &y_.theta_t, &y_.phi,
                            &y_.phi_t, &b_.bg, &b_.bg_t};
  for (ScalarField* f : fields)
    for (std::size_t i : ring_) {
      worst = std::max(worst, std::fabs((*f)[i]));
      (*f)[i] = 0.0;
    }
  last_leak_ = worst;
  leak_max_ = std::max(leak_max_, worst);
}

void Simulation::check_finite(const char* where) const {
  const ScalarField* fields[6] = {&y_.theta, &y_.theta_t, &y_.phi,
                                  &y_.phi_t, &b_.bg, &b_.bg_t};
  for (const ScalarField* f : fields)
    for (double v : f->v)
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite field value " << where;
        abort_run(os.str());
      }
}

void Simulation::abort_run(const std::string& why) const {
  std::ostringstream os;
  os << "run aborted at step " << step_ << " (t = " << y_.t
     << "): " << why << "; wall time " << (now_seconds() - wall_start_)
     << " s; recent margins:";
  const std::size_t m = margins_.size();
  for (std::size_t k = (m > 5 ? m - 5 : 0); k < m; ++k) os << " " << margins_[k];
  if (margins_.empty()) os << " (none)";
  throw std::runtime_error(os.str());
}

void Simulation::step() {
  const std::size_t n = grid_.size();
  const double dt = dt_;

  StateDeriv k1(grid_), k2(grid_), k3(grid_), k4(grid_);
  BackgroundDeriv b1(grid_), b2(grid_), b3(grid_), b4(grid_);
  StateSnapshot tmp(grid_, y_.t);
  BackgroundState tb(grid_);

  auto blend = [&](const StateDeriv& k, const BackgroundDeriv& bd, double c) {
    tmp.t = y_.t + c;
    for (std::size_t i = 0; i < n; ++i) {
      tmp.theta[i] = y_.theta[i] + c * k.theta_dot[i];
      tmp.theta_t[i] = y_.theta_t[i] + c * k.theta_t_dot[i];
      tmp.phi[i] = y_.phi[i] + c * k.phi_dot[i];
      tmp.phi_t[i] = y_.phi_t[i] + c * k.phi_t_dot[i];
      tb.bg[i] = b_.bg[i] + c * bd.bg_dot[i];
      tb.bg_t[i] = b_.bg_t[i] + c * bd.bg_t_dot[i];
    }
  };

  double stage_margin = 0.0;
  try {
    k1 = rhs_stage(y_, b_, solve_margin_, &stage_margin, &b1);
    blend(k1, b1, 0.5 * dt);
    k2 = rhs_stage(tmp, tb, solve_margin_, nullptr, &b2);
    blend(k2, b2, 0.5 * dt);
    k3 = rhs_stage(tmp, tb, solve_margin_, nullptr, &b3);
    blend(k3, b3, dt);
    k4 = rhs_stage(tmp, tb, solve_margin_, nullptr, &b4);
  } catch (const std::exception& e) {
    abort_run(e.what());
  }

  const double w = dt / 6.0;
  for (std::size_t i = 0; i < n; ++i) {
    y_.theta[i] += w * (k1.theta_dot[i] + 2 * k2.theta_dot[i] +
                        2 * k3.theta_dot[i] + k4.theta_dot[i]);
    y_.theta_t[i] += w * (k1.theta_t_dot[i] + 2 * k2.theta_t_dot[i] +
                          2 * k3.theta_t_dot[i] + k4.theta_t_dot[i]);
    y_.phi[i] += w * (k1.phi_dot[i] + 2 * k2.phi_dot[i] +
                      2 * k3.phi_dot[i] + k4.phi_dot[i]);
    y_.phi_t[i] += w * (k1.phi_t_dot[i] + 2 * k2.phi_t_dot[i] +
                        2 * k3.phi_t_dot[i] + k4.phi_t_dot[i]);
    b_.bg[i] += w * (b1.bg_dot[i] + 2 * b2.bg_dot[i] + 2 * b3.bg_dot[i] + b4.bg_dot[i]);
    b_.bg_t[i] += w * (b1.bg_t_dot[i] + 2 * b2.bg_t_dot[i] +
                       2 * b3.bg_t_dot[i] + b4.bg_t_dot[i]);
  }
  y_.t += dt;
  ++step_;
  margins_.push_back(stage_margin);
  last_margin_ = stage_margin;

  zero_boundary_and_monitor();
  if (last_leak_ > leak_abort_) {
    std::ostringstream os;
    os << "boundary leak " << last_leak_ << " exceeds " << leak_abort_
       << " (domain too small for this horizon)";
    abort_run(os.str());
  }
  check_finite("after step combine");
  hist_.push(y_, b_);
}

void Simulation::negate_velocities() {
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    y_.theta_t[i] = -y_.theta_t[i];
    y_.phi_t[i] = -y_.phi_t[i];
    b_.bg_t[i] = -b_.bg_t[i];
  }
  hist_.clear();
  hist_.push(y_, b_);
}

void Simulation::restore(const StateSnapshot& s, const BackgroundState& b,
                         const StateHistory& h, long step_index, double dt,
                         double leak_max) {
  y_ = s;
  b_ = b;
  rebind(y_.theta, grid_);
  rebind(y_.theta_t, grid_);
  rebind(y_.phi, grid_);
  rebind(y_.phi_t, grid_);
  rebind(b_.bg, grid_);
  rebind(b_.bg_t, grid_);
  hist_ = h;
  hist_.rebind_grid(grid_);
  step_ = step_index;
  dt_ = dt;
  leak_max_ = leak_max;
  last_leak_ = 0.0;
  margins_.clear();
  last_margin_ = 0.0;
}

}  // namespace flab
