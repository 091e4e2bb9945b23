#include "flab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace flab {

namespace {

const char* kKindNames[] = {
    "geodesic_exactness", "convergence_order", "stability_scaling", "bounds_audit",
    "decay_profile",      "ghost_integral",    "identity_suite",
};

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error("config: " + what);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) fail("trailing characters in value of '" + key + "': " + v);
    return x;
  } catch (const std::invalid_argument&) {
    fail("value of '" + key + "' is not a number: " + v);
  } catch (const std::out_of_range&) {
    fail("value of '" + key + "' is out of double range: " + v);
  }
}

long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) fail("trailing characters in value of '" + key + "': " + v);
    return x;
  } catch (const std::invalid_argument&) {
    fail("value of '" + key + "' is not an integer: " + v);
  } catch (const std::out_of_range&) {
    fail("value of '" + key + "' is out of integer range: " + v);
  }
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& w : tokens(v)) out.push_back(parse_double(key, w));
  return out;
}

BumpTerm parse_term(const std::string& key, const std::string& v) {
  const auto tk = tokens(v);
  if (tk.size() < 6)
    fail("term '" + key + "' needs: shape amplitude cx cy cz width [power], got '" + v + "'");
  BumpTerm b;
  if (tk[0] == "smooth") {
    b.kind = ProfileKind::SmoothBump;
    if (tk.size() != 6) fail("term '" + key + "': smooth takes exactly 6 tokens");
  } else if (tk[0] == "poly") {
    b.kind = ProfileKind::PolyBump;
    if (tk.size() == 7) {
      const long p = parse_int(key, tk[6]);
      if (p < 2 || p > 32) fail("term '" + key + "': poly power must lie in 2..32");
      b.poly_power = static_cast<int>(p);
    } else if (tk.size() != 6) {
      fail("term '" + key + "': poly takes 6 or 7 tokens");
    }
  } else {
    fail("term '" + key + "': unknown shape '" + tk[0] + "' (want smooth or poly)");
  }
  b.amplitude = parse_double(key, tk[1]);
  for (int a = 0; a < 3; ++a) b.center[a] = parse_double(key, tk[2 + a]);
  b.width = parse_double(key, tk[5]);
  if (!(b.width > 0.0)) fail("term '" + key + "': width must be positive");
  return b;
}

// Term keys carry a 1-based index suffix so files stay order-independent.
struct TermSlot {
  int index;
  std::string key;
  BumpTerm term;
};

void check_terms(const std::string& family, std::vector<TermSlot>& slots,
                 DataFunction& dst, int dim) {
  std::sort(slots.begin(), slots.end(),
            [](const TermSlot& a, const TermSlot& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].index != static_cast<int>(i) + 1)
      fail("term indices of '" + family + "' must be 1..N without gaps; missing " +
           family + std::to_string(i + 1));
    const BumpTerm& b = slots[i].term;
    if (dim == 2 && b.center[2] != 0.0)
      fail("term '" + slots[i].key + "': z-center must be 0 in a 2D run");
    double c2 = 0.0;
    for (int a = 0; a < dim; ++a) c2 += b.center[a] * b.center[a];
    const double reach = std::sqrt(c2) + b.width;
    if (reach > 1.0 + 1e-12) {
      std::ostringstream os;
      os << "term '" << slots[i].key << "' leaves the unit ball: |center| + width = "
         << reach << " > 1 (data must be supported in |x| <= 1)";
      fail(os.str());
    }
    dst.terms.push_back(b);
  }
  dst.dim = dim;
}

std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt_term(const BumpTerm& b) {
  std::ostringstream os;
  os << (b.kind == ProfileKind::SmoothBump ? "smooth" : "poly") << ' '
     << fmt_g(b.amplitude) << ' ' << fmt_g(b.center[0]) << ' ' << fmt_g(b.center[1])
     << ' ' << fmt_g(b.center[2]) << ' ' << fmt_g(b.width);
  if (b.kind == ProfileKind::PolyBump) os << ' ' << b.poly_power;
  return os.str();
}

bool data_is_zero(const DataFunction& f) { return f.terms.empty(); }

void require_radial(const char* what, const DataFunction& f) {
  for (const auto& b : f.terms)
    if (b.modulated || b.center[0] != 0.0 || b.center[1] != 0.0 || b.center[2] != 0.0)
      fail(std::string(what) +
           ": a radial-grid run needs origin-centered unmodulated terms");
}

}  // namespace

const char* experiment_kind_name(ExperimentKind k) {
  return kKindNames[static_cast<int>(k)];
}

ExperimentKind experiment_kind_from(const std::string& name) {
  for (int i = 0; i < 7; ++i)
    if (name == kKindNames[i]) return static_cast<ExperimentKind>(i);
  std::string valid;
  for (int i = 0; i < 7; ++i) {
    if (i) valid += ", ";
    valid += kKindNames[i];
  }
  fail("unknown experiment kind '" + name + "' (valid: " + valid + ")");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::map<std::string, std::string> kv;
  std::map<std::string, std::vector<TermSlot>> term_families{
      {"bg_term", {}},      {"bg_velocity_term", {}}, {"pert_u0_term", {}},
      {"pert_u1_term", {}}, {"pert_v0_term", {}},     {"pert_v1_term", {}},
  };

  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail("line " + std::to_string(lineno) + " has no '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) fail("line " + std::to_string(lineno) + " has an empty key");

    bool is_term = false;
    for (auto& fam : term_families) {
      if (key.rfind(fam.first, 0) != 0) continue;
      const std::string suffix = key.substr(fam.first.size());
      if (suffix.empty() || suffix.find_first_not_of("0123456789") != std::string::npos)
        continue;  // e.g. "bg_term" with no index falls through to unknown-key
      const int idx = static_cast<int>(parse_int(key, suffix));
      for (const auto& s : fam.second)
        if (s.index == idx) fail("duplicate key '" + key + "'");
      fam.second.push_back({idx, key, parse_term(key, val)});
      is_term = true;
      break;
    }
    if (is_term) continue;
    if (kv.count(key)) fail("duplicate key '" + key + "'");
    kv[key] = val;
  }

  const auto take = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::string();
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  const std::string kind_s = take("experiment");
  if (kind_s.empty()) fail("missing required key 'experiment'");
  cfg.kind = experiment_kind_from(kind_s);

  if (std::string v = take("dim"); !v.empty()) {
    const long d = parse_int("dim", v);
    if (d != 2 && d != 3) fail("dim must be 2 or 3");
    cfg.dim = static_cast<int>(d);
  }
  if (std::string v = take("grid"); !v.empty()) {
    if (v == "cartesian") cfg.grid_kind = GridKind::Cartesian;
    else if (v == "radial") cfg.grid_kind = GridKind::Radial3d;
    else fail("grid must be cartesian or radial, got '" + v + "'");
  }
  if (std::string v = take("h"); !v.empty()) cfg.h = parse_double("h", v);
  if (std::string v = take("L"); !v.empty()) cfg.L = parse_double("L", v);
  if (std::string v = take("T_max"); !v.empty()) cfg.T_max = parse_double("T_max", v);
  if (std::string v = take("cfl_margin"); !v.empty())
    cfg.cfl_margin = parse_double("cfl_margin", v);
  if (std::string v = take("solve_margin"); !v.empty())
    cfg.solve_margin = parse_double("solve_margin", v);
  if (std::string v = take("leak_abort"); !v.empty())
    cfg.leak_abort = parse_double("leak_abort", v);
  if (std::string v = take("epsilon"); !v.empty()) cfg.epsilon = parse_double("epsilon", v);
  if (std::string v = take("rows"); !v.empty())
    cfg.rows = static_cast<int>(parse_int("rows", v));
  if (std::string v = take("checkpoint_every"); !v.empty())
    cfg.checkpoint_every = static_cast<int>(parse_int("checkpoint_every", v));
  if (std::string v = take("seed"); !v.empty())
    cfg.seed = static_cast<unsigned>(parse_int("seed", v));
  double bg_amplitude = 1.0;
  if (std::string v = take("bg_amplitude"); !v.empty())
    bg_amplitude = parse_double("bg_amplitude", v);
  if (std::string v = take("h_list"); !v.empty()) cfg.h_list = parse_list("h_list", v);
  if (std::string v = take("eps_list"); !v.empty())
    cfg.eps_list = parse_list("eps_list", v);
  if (std::string v = take("times"); !v.empty()) cfg.times = parse_list("times", v);
  if (std::string v = take("csv_name"); !v.empty()) cfg.csv_name = v;
  if (std::string v = take("summary_name"); !v.empty()) cfg.summary_name = v;

  if (!kv.empty()) fail("unknown key '" + kv.begin()->first + "'");

  // ---- assemble and validate --------------------------------------------
  if (!(cfg.h > 0.0)) fail("h must be positive");
  if (!(cfg.L >= 1.0)) fail("L must be at least 1 (the data support radius)");
  if (!(cfg.T_max >= 0.0)) fail("T_max must be nonnegative");
  if (!(cfg.cfl_margin > 0.0 && cfg.cfl_margin <= 1.0)) fail("cfl_margin must lie in (0, 1]");
  if (!(cfg.solve_margin > 0.0 && cfg.solve_margin < 1.0))
    fail("solve_margin must lie in (0, 1)");
  if (!(cfg.leak_abort > 0.0)) fail("leak_abort must be positive");
  if (cfg.epsilon < 0.0) fail("epsilon must be nonnegative");
  if (cfg.rows < 2) fail("rows must be at least 2");
  if (cfg.checkpoint_every < 0) fail("checkpoint_every must be nonnegative");

  cfg.background.dim = cfg.dim;
  cfg.background.amplitude = bg_amplitude;
  check_terms("bg_term", term_families["bg_term"], cfg.background.theta0, cfg.dim);
  check_terms("bg_velocity_term", term_families["bg_velocity_term"],
              cfg.background.theta1, cfg.dim);
  check_terms("pert_u0_term", term_families["pert_u0_term"], cfg.pert_u0, cfg.dim);
  check_terms("pert_u1_term", term_families["pert_u1_term"], cfg.pert_u1, cfg.dim);
  check_terms("pert_v0_term", term_families["pert_v0_term"], cfg.pert_v0, cfg.dim);
  check_terms("pert_v1_term", term_families["pert_v1_term"], cfg.pert_v1, cfg.dim);

  if (cfg.grid_kind == GridKind::Radial3d) {
    if (cfg.dim != 3) fail("grid = radial requires dim = 3");
    require_radial("bg_term", cfg.background.theta0);
    require_radial("bg_velocity_term", cfg.background.theta1);
    require_radial("pert_u0_term", cfg.pert_u0);
    require_radial("pert_u1_term", cfg.pert_u1);
    require_radial("pert_v0_term", cfg.pert_v0);
    require_radial("pert_v1_term", cfg.pert_v1);
  }

  const auto require_ladder = [&](const char* key, const std::vector<double>& v) {
    if (v.size() < 2)
      fail(std::string(key) + " needs at least two entries for this experiment");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(v[i] > 0.0)) fail(std::string(key) + " entries must be positive");
      if (i && !(v[i] < v[i - 1]))
        fail(std::string(key) + " must be strictly decreasing");
    }
  };
  switch (cfg.kind) {
    case ExperimentKind::GeodesicExactness:
      if (cfg.epsilon != 0.0)
        fail("geodesic_exactness evolves the unperturbed background; set epsilon = 0");
      if (cfg.h_list.empty()) cfg.h_list = {cfg.h, 0.5 * cfg.h};
      require_ladder("h_list", cfg.h_list);
      break;
    case ExperimentKind::ConvergenceOrder:
      require_ladder("h_list", cfg.h_list);
      break;
    case ExperimentKind::StabilityScaling:
      require_ladder("eps_list", cfg.eps_list);
      break;
    case ExperimentKind::BoundsAudit:
      if (cfg.times.empty())
        for (int i = 0; i < 20; ++i)
          cfg.times.push_back(0.5 + (cfg.T_max - 0.5) * i / 19.0);
      for (double t : cfg.times)
        if (t < 0.0) fail("times entries must be nonnegative");
      break;
    case ExperimentKind::DecayProfile:
    case ExperimentKind::GhostIntegral:
      if (!(cfg.epsilon > 0.0))
        fail(std::string(experiment_kind_name(cfg.kind)) +
             " needs a positive epsilon (it tracks the perturbation)");
      break;
    case ExperimentKind::IdentitySuite:
      break;
  }

  // Admissibility of the background: every experiment that evaluates it
  // must sit inside the smallness thresholds of the stability theory.
  if (cfg.kind != ExperimentKind::IdentitySuite &&
      !(data_is_zero(cfg.background.theta0) && data_is_zero(cfg.background.theta1))) {
    const LambdaNorms ln = lambda_norms(cfg.background);
    if (!ln.all_met()) {
      std::ostringstream os;
      os << "background outside the admissible range:";
      const char* n0 = cfg.dim == 2 ? "lambda0~" : "lambda0";
      const char* n1 = cfg.dim == 2 ? "lambda1~" : "lambda1";
      if (!ln.met0)
        os << ' ' << n0 << " = " << ln.lambda0 << " >= bound " << ln.threshold0;
      if (!ln.met1)
        os << (ln.met0 ? " " : "; ") << n1 << " = " << ln.lambda1 << " >= bound "
           << ln.threshold1;
      if (!ln.met_reg) os << "; regularity norm is not finite";
      os << " (dim " << cfg.dim << ")";
      fail(os.str());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_echo(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "experiment = " << experiment_kind_name(cfg.kind) << '\n';
  os << "dim = " << cfg.dim << '\n';
  os << "grid = " << (cfg.grid_kind == GridKind::Radial3d ? "radial" : "cartesian")
     << '\n';
  os << "h = " << fmt_g(cfg.h) << '\n';
  os << "L = " << fmt_g(cfg.L) << '\n';
  os << "T_max = " << fmt_g(cfg.T_max) << '\n';
  os << "cfl_margin = " << fmt_g(cfg.cfl_margin) << '\n';
  os << "solve_margin = " << fmt_g(cfg.solve_margin) << '\n';
  os << "leak_abort = " << fmt_g(cfg.leak_abort) << '\n';
  os << "epsilon = " << fmt_g(cfg.epsilon) << '\n';
  os << "rows = " << cfg.rows << '\n';
  os << "checkpoint_every = " << cfg.checkpoint_every << '\n';
  os << "seed = " << cfg.seed << '\n';
  os << "bg_amplitude = " << fmt_g(cfg.background.amplitude) << '\n';
  const auto emit_terms = [&os](const char* family, const DataFunction& f) {
    for (std::size_t i = 0; i < f.terms.size(); ++i)
      os << family << i + 1 << " = " << fmt_term(f.terms[i]) << '\n';
  };
  emit_terms("bg_term", cfg.background.theta0);
  emit_terms("bg_velocity_term", cfg.background.theta1);
  emit_terms("pert_u0_term", cfg.pert_u0);
  emit_terms("pert_u1_term", cfg.pert_u1);
  emit_terms("pert_v0_term", cfg.pert_v0);
  emit_terms("pert_v1_term", cfg.pert_v1);
  const auto emit_list = [&os](const char* key, const std::vector<double>& v) {
    if (v.empty()) return;
    os << key << " =";
    for (double x : v) os << ' ' << fmt_g(x);
    os << '\n';
  };
  emit_list("h_list", cfg.h_list);
  emit_list("eps_list", cfg.eps_list);
  emit_list("times", cfg.times);
  os << "csv_name = " << cfg.csv_name << '\n';
  os << "summary_name = " << cfg.summary_name << '\n';
  return os.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg, const std::string& tag) {
  const std::string echo = config_echo(cfg) + tag;
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : echo) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace flab
