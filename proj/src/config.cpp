#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "datko/admissibility.hpp"
#include "datko/expr.hpp"
#include "tasks.hpp"

namespace datko {

namespace {

// Typed access to a JSON object that remembers which keys were read, so
// misspelled parameters are reported instead of silently ignored.
class Block {
 public:
  Block(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("must be a JSON object");
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where_ + ": " + msg); }

  bool has(const char* key) {
    used_.insert(key);
    return j_.contains(key);
  }

  const Json& raw(const char* key) {
    used_.insert(key);
    if (!j_.contains(key)) fail(std::string("missing '") + key + "'");
    return j_.at(key);
  }

  double number(const char* key, std::optional<double> def = std::nullopt) {
    if (!has(key)) {
      if (!def) fail(std::string("missing '") + key + "'");
      return *def;
    }
    const Json& v = j_.at(key);
    if (!v.is_number()) fail(std::string("'") + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(std::string("'") + key + "' must be finite");
    return d;
  }

  double positive(const char* key, double def) {
    const double v = number(key, def);
    if (!(v > 0.0)) fail(std::string("'") + key + "' must be positive");
    return v;
  }

  int integer(const char* key, int def, int min_value) {
    if (!has(key)) return def;
    const Json& v = j_.at(key);
    if (!v.is_number_integer()) fail(std::string("'") + key + "' must be an integer");
    const auto i = v.get<long long>();
    if (i < min_value || i > 100000000) {
      fail(std::string("'") + key + "' must be >= " + std::to_string(min_value));
    }
    return static_cast<int>(i);
  }

  bool boolean(const char* key, bool def) {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) fail(std::string("'") + key + "' must be true or false");
    return j_.at(key).get<bool>();
  }

  std::string string(const char* key, std::optional<std::string> def = std::nullopt) {
    if (!has(key)) {
      if (!def) fail(std::string("missing '") + key + "'");
      return *def;
    }
    if (!j_.at(key).is_string()) fail(std::string("'") + key + "' must be a string");
    return j_.at(key).get<std::string>();
  }

  std::vector<double> numbers(const char* key) {
    const Json& v = raw(key);
    if (!v.is_array()) fail(std::string("'") + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        fail(std::string("'") + key + "' must contain finite numbers");
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  /// An explicit increasing list, or {"start","end","step"} / {"start","end","count"}.
  std::vector<double> grid(const char* key, std::optional<std::vector<double>> def = std::nullopt) {
    if (!has(key)) {
      if (!def) fail(std::string("missing '") + key + "'");
      return *def;
    }
    const Json& v = j_.at(key);
    std::vector<double> g;
    if (v.is_array()) {
      g = numbers(key);
    } else {
      Block b(v, where_ + "." + key);
      const double start = b.number("start");
      const double end = b.number("end");
      if (!(end >= start)) b.fail("'end' must be >= 'start'");
      if (b.has("count")) {
        const int n = b.integer("count", 0, 1);
        for (int i = 0; i < n; ++i) g.push_back(n == 1 ? start : start + (end - start) * i / (n - 1));
        if (n > 1) g.back() = end;
      } else {
        g = uniform_grid(start, end, b.positive("step", 1.0));
      }
      b.finish();
    }
    if (g.empty()) fail(std::string("'") + key + "' is empty");
    for (std::size_t i = 1; i < g.size(); ++i) {
      if (!(g[i] > g[i - 1])) fail(std::string("'") + key + "' must be strictly increasing");
    }
    if (!(g.front() >= 0.0)) fail(std::string("'") + key + "' must be non-negative");
    return g;
  }

  Block child(const char* key) { return Block(raw(key), where_ + "." + key); }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!used_.contains(k)) fail("unknown parameter '" + k + "'");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> used_;
};

NormKind parse_norm(Block& b) {
  const std::string n = b.string("norm", "euclidean");
  if (n == "euclidean") return NormKind::kEuclidean;
  if (n == "max") return NormKind::kMax;
  b.fail("norm must be 'euclidean' or 'max'");
}

Expr compile(const std::string& src, const std::string& where) {
  try {
    return parse_generator(src);
  } catch (const ParseError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

tasks::PhiGrid phi_grid(Block& b) {
  tasks::PhiGrid g;
  g.horizon = b.positive("horizon", g.horizon);
  g.tau_step = b.positive("tau_step", g.tau_step);
  if (g.tau_step > g.horizon) b.fail("'tau_step' must not exceed 'horizon'");
  g.refine_depth = b.integer("refine_depth", g.refine_depth, 0);
  g.rel_tol = b.positive("rel_tol", g.rel_tol);
  return g;
}

tasks::QuadParams quad_params(Block& b) {
  tasks::QuadParams q;
  q.t_int = b.positive("t_int", q.t_int);
  q.h0 = b.positive("h0", q.h0);
  q.rtol = b.positive("quad_rtol", q.rtol);
  q.max_levels = b.integer("max_levels", q.max_levels, 1);
  q.growth_tol = b.positive("growth_tol", q.growth_tol);
  return q;
}

tasks::SGrid s_window(Block& b, double default_horizon = 40.0) {
  tasks::SGrid w;
  w.s_grid = b.grid("s_grid", uniform_grid(0.0, 20.0, 0.25));
  w.horizon = b.positive("window", default_horizon);
  w.growth_threshold = b.number("growth_threshold", w.growth_threshold);
  if (!(w.growth_threshold > 1.0)) b.fail("'growth_threshold' must exceed 1");
  w.rel_tol = b.positive("verdict_rel_tol", w.rel_tol);
  w.t_step = b.positive("t_step", w.t_step);
  w.refine_depth = b.integer("window_refine_depth", w.refine_depth, 0);
  return w;
}

tasks::FunctionSpec function_spec(Block& b, int dimension) {
  tasks::FunctionSpec f;
  if (!b.has("u")) {
    f.constant.assign(dimension, 0.0);
    f.constant[0] = 1.0;
    return f;
  }
  Block u = b.child("u");
  const std::string kind = u.string("kind");
  if (kind == "constant") {
    f.constant = u.numbers("x");
  } else if (kind == "closed_form") {
    const Json& c = u.raw("components");
    if (!c.is_array()) u.fail("'components' must be an array of expressions");
    for (const auto& e : c) {
      if (!e.is_string()) u.fail("'components' must be strings");
      compile(e.get<std::string>(), "u.components");
      f.components.push_back(e.get<std::string>());
    }
  } else {
    u.fail("kind must be 'constant' or 'closed_form'");
  }
  u.finish();
  if (f.dimension() != dimension) b.fail("u has the wrong dimension for the family");
  return f;
}

std::vector<tasks::Probe> explicit_probes(Block& b, int dimension) {
  std::vector<tasks::Probe> out;
  const Json& arr = b.raw("probes");
  if (!arr.is_array() || arr.empty()) b.fail("'probes' must be a non-empty array");
  for (const auto& p : arr) {
    Block pb(p, "probe");
    tasks::Probe probe;
    probe.t = pb.number("t");
    if (!(probe.t >= 0.0)) pb.fail("'t' must be >= 0");
    const auto x = pb.numbers("x");
    if (static_cast<int>(x.size()) != dimension) pb.fail("'x' has the wrong dimension");
    probe.x = Eigen::Map<const Eigen::VectorXd>(x.data(), dimension);
    pb.finish();
    out.push_back(std::move(probe));
  }
  return out;
}

}  // namespace

namespace tasks {

SampledFunction FunctionSpec::build() const {
  if (components.empty()) {
    return SampledFunction::constant(Eigen::Map<const Eigen::VectorXd>(
        constant.data(), static_cast<Eigen::Index>(constant.size())));
  }
  std::vector<Expr> c;
  for (const auto& s : components) c.push_back(parse_generator(s));
  return SampledFunction::closed_form(std::move(c));
}

int FunctionSpec::dimension() const {
  return static_cast<int>(components.empty() ? constant.size() : components.size());
}

const std::vector<std::string>& known_suites() {
  static const std::vector<std::string> suites = {
      "cocycle",   "reversibility",      "projection",      "fixpoint",    "decay_lemma",
      "phi_t_bound", "sandwich",         "alpha_monotonicity", "grid_refinement", "homogeneity",
      "linearity", "W_additivity",       "continuity"};
  return suites;
}

Task parse_task(const Json& block, std::size_t index, int dimension) {
  Block b(block, "tasks[" + std::to_string(index) + "]");
  Task task;
  task.kind = b.string("kind");
  task.name = b.string("name", task.kind + "_" + std::to_string(index));
  for (const char c : task.name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) {
      b.fail("'name' may only contain letters, digits, '_' and '-'");
    }
  }

  if (task.kind == "phi") {
    PhiTask t;
    t.alpha = b.number("alpha");
    t.grid = phi_grid(b);
    t.u = function_spec(b, dimension);
    t.t_grid = b.grid("t_grid", uniform_grid(0.0, 10.0, 0.5));
    if (b.has("tail_alpha_ref")) {
      t.tail_alpha_ref = b.number("tail_alpha_ref");
      if (!(*t.tail_alpha_ref < t.alpha)) b.fail("'tail_alpha_ref' must be smaller than 'alpha'");
      t.tail_s_grid = b.grid("tail_s_grid", uniform_grid(0.0, std::ceil(t.t_grid.back()), 0.25));
    }
    if (b.has("continuity")) {
      Block c = b.child("continuity");
      Continuity k;
      k.t0 = c.number("t0");
      k.t1 = c.number("t1");
      if (!(k.t0 >= 0.0) || !(k.t1 > k.t0)) c.fail("need 0 <= t0 < t1");
      k.steps = c.integer("steps", k.steps, 2);
      c.finish();
      t.continuity = k;
    }
    task.params = std::move(t);
  } else if (task.kind == "admissible") {
    AdmissibleTask t;
    if (b.has("alphas")) t.alphas = b.numbers("alphas");
    if (b.has("bracket")) {
      const auto br = b.numbers("bracket");
      if (br.size() != 2 || !(br[0] < br[1])) b.fail("'bracket' must be [alpha_lo, alpha_hi] with lo < hi");
      t.bracket = {br[0], br[1]};
    }
    if (t.alphas.empty() && !t.bracket) b.fail("give 'alphas' and/or 'bracket'");
    t.tol_alpha = b.positive("tol_alpha", t.tol_alpha);
    t.window = s_window(b);
    task.params = std::move(t);
  } else if (task.kind == "lyapunov") {
    LyapunovTask t;
    t.t_max = b.positive("t_max", t.t_max);
    t.grid_step = b.positive("grid_step", t.grid_step);
    if (t.t_max < 10.0 * t.grid_step) b.fail("'t_max' must be at least 10 grid steps");
    t.inclusion = b.boolean("inclusion_check", t.inclusion);
    t.inclusion_margin = b.positive("inclusion_margin", t.inclusion_margin);
    t.window = s_window(b);
    task.params = std::move(t);
  } else if (task.kind == "datko") {
    DatkoTask t;
    t.p = b.positive("p", t.p);
    t.alpha = b.number("alpha");
    t.grid = phi_grid(b);
    t.quad = quad_params(b);
    if (b.has("probes")) t.probes = explicit_probes(b, dimension);
    t.probe_times = b.grid("probe_times", std::vector<double>{});
    t.random_probes = b.integer("random_probes", t.random_probes, 0);
    if (t.probes.empty() && t.probe_times.empty()) {
      t.probe_times = uniform_grid(0.0, 15.0, 1.0);
    }
    t.slack = b.positive("slack", t.slack);
    if (b.has("tail_alpha_ref")) {
      t.tail_alpha_ref = b.number("tail_alpha_ref");
      if (!(*t.tail_alpha_ref < t.alpha) || !(*t.tail_alpha_ref < 0.0)) {
        b.fail("'tail_alpha_ref' must be negative and smaller than 'alpha'");
      }
    }
    t.window = s_window(b);
    task.params = std::move(t);
  } else if (task.kind == "certify") {
    CertifyTask t;
    t.p = b.positive("p", t.p);
    t.alpha = b.number("alpha", t.alpha);
    if (!(t.alpha >= 0.0)) b.fail("'alpha' must be >= 0 for a certificate");
    t.delta = b.number("delta", t.delta);
    if (!(t.delta > 0.0 && t.delta < 1.0)) b.fail("'delta' must lie in (0, 1)");
    t.grid = phi_grid(b);
    t.quad = quad_params(b);
    t.verify_grid = b.grid("verify_grid", uniform_grid(0.0, 20.0, 0.5));
    t.probe_times = b.grid("probe_times", uniform_grid(0.0, 15.0, 1.0));
    t.random_probes = b.integer("random_probes", t.random_probes, 0);
    t.m_horizon = b.positive("m_horizon", t.m_horizon);
    task.params = std::move(t);
  } else if (task.kind == "verify-props") {
    PropsTask t;
    if (b.has("suites")) {
      const Json& s = b.raw("suites");
      if (!s.is_array()) b.fail("'suites' must be an array of names");
      for (const auto& e : s) {
        if (!e.is_string()) b.fail("'suites' must be strings");
        const auto name = e.get<std::string>();
        const auto& known = known_suites();
        if (std::find(known.begin(), known.end(), name) == known.end()) {
          b.fail("unknown suite '" + name + "'");
        }
        t.suites.push_back(name);
      }
    }
    t.cases = b.integer("cases", t.cases, 1);
    t.alpha = b.number("alpha", t.alpha);
    t.p = b.positive("p", t.p);
    t.t_max = b.positive("t_max", t.t_max);
    t.grid = phi_grid(b);
    t.quad = quad_params(b);
    t.t_norm = b.positive("t_norm", t.t_norm);
    t.norm_step = b.positive("norm_step", t.norm_step);
    task.params = std::move(t);
  } else {
    b.fail("unknown task kind '" + task.kind + "'");
  }
  b.finish();
  return task;
}

}  // namespace tasks

EvolutionFamily build_family(const Json& block, const std::filesystem::path& base_dir) {
  Block b(block, "family");
  const std::string kind = b.string("kind");
  std::optional<EvolutionFamily> family;
  if (kind == "scalar_exp") {
    const std::string f = b.string("f");
    const int dim = b.integer("dimension", 1, 1);
    family.emplace(ScalarExpFamily{compile(f, "family.f"), dim}, parse_norm(b));
  } else if (kind == "matrix_ode") {
    const Json& a = b.raw("A");
    if (!a.is_array() || a.empty()) b.fail("'A' must be a square array of expressions");
    std::vector<std::vector<Expr>> rows;
    for (const auto& row : a) {
      if (!row.is_array() || row.size() != a.size()) b.fail("'A' must be square");
      auto& out = rows.emplace_back();
      for (const auto& e : row) {
        if (e.is_string()) {
          out.push_back(compile(e.get<std::string>(), "family.A"));
        } else if (e.is_number()) {
          out.push_back(Expr::constant(e.get<double>()));
        } else {
          b.fail("'A' entries must be expressions or numbers");
        }
      }
    }
    MatrixODEOptions opts;
    opts.integrator_tol = b.positive("integrator_tol", opts.integrator_tol);
    opts.max_step = b.positive("max_step", opts.max_step);
    opts.cache_step = b.positive("cache_step", opts.cache_step);
    family.emplace(MatrixODEFamily(std::move(rows), opts), parse_norm(b));
  } else if (kind == "tabulated") {
    std::filesystem::path path = b.string("path");
    if (path.is_relative()) path = base_dir / path;
    try {
      family.emplace(TabulatedFamily::from_csv(path.string()), parse_norm(b));
    } catch (const std::exception& e) {
      throw ConfigError(std::string("family: ") + e.what());
    }
  } else {
    b.fail("kind must be 'scalar_exp', 'matrix_ode' or 'tabulated'");
  }
  b.finish();
  return *family;
}

RunConfig parse_config(const Json& doc, const std::filesystem::path& base_dir) {
  Block b(doc, "config");
  RunConfig cfg;
  cfg.raw = doc;
  cfg.base_dir = base_dir;
  b.string("name", "");
  b.string("description", "");
  std::filesystem::path out = b.string("output_dir", "out");
  cfg.output_dir = out.is_relative() ? base_dir / out : out;
  if (b.has("seed")) {
    const Json& s = doc.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      b.fail("'seed' must be a non-negative integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }
  const EvolutionFamily family = build_family(b.raw("family"), base_dir);
  if (b.has("tasks")) {
    const Json& t = doc.at("tasks");
    if (!t.is_array()) b.fail("'tasks' must be an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto task = tasks::parse_task(t[i], i, family.dimension());
      if (!names.insert(task.name).second) b.fail("duplicate task name '" + task.name + "'");
      cfg.tasks.push_back(t[i]);
    }
  }
  b.finish();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace datko
