#include "datko/run.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>

#include <spdlog/spdlog.h>

#include "datko/admissibility.hpp"
#include "datko/datko.hpp"
#include "datko/parallel.hpp"
#include "datko/phi.hpp"
#include "datko/phi_operator.hpp"
#include "datko/random.hpp"
#include "tasks.hpp"

namespace datko {

namespace {

constexpr const char* kVersion = "1.0.0";

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON has no inf/nan; report them as strings rather than null.
Json jnum(double v) {
  if (std::isfinite(v)) return v;
  return num(v);
}

Json jvec(const Eigen::VectorXd& x) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) a.push_back(jnum(x(i)));
  return a;
}

Json jopt(const std::optional<double>& v) { return v ? jnum(*v) : Json(nullptr); }

Json samples(const BoundingFunction& m) {
  Json a = Json::array();
  for (std::size_t i = 0; i < m.s.size(); ++i) a.push_back(Json::array({jnum(m.s[i]), jnum(m.m[i])}));
  return a;
}

PhiConfig phi_config(double alpha, const tasks::PhiGrid& g) {
  PhiConfig c;
  c.alpha = alpha;
  c.horizon = g.horizon;
  c.tau_step = g.tau_step;
  c.refine_depth = g.refine_depth;
  c.rel_tol = g.rel_tol;
  return c;
}

DatkoQuadConfig quad_config(const tasks::QuadParams& q) {
  DatkoQuadConfig c;
  c.t_int = q.t_int;
  c.quad.h0 = q.h0;
  c.quad.rtol = q.rtol;
  c.quad.max_levels = q.max_levels;
  c.growth_tol = q.growth_tol;
  return c;
}

VerdictOptions verdict_options(const tasks::SGrid& w) {
  VerdictOptions o;
  o.growth_threshold = w.growth_threshold;
  o.rel_tol = w.rel_tol;
  o.window.t_step = w.t_step;
  o.window.refine_depth = w.refine_depth;
  return o;
}

Json verdict_json(const AdmissibilityVerdict& v) {
  return {{"alpha", jnum(v.alpha)},
          {"verdict", std::string(to_string(v.verdict))},
          {"growth_ratio", jnum(v.growth_ratio)},
          {"worst_s", jnum(v.worst_s)},
          {"window", {{"T", jnum(v.horizon)}, {"2T", jnum(2.0 * v.horizon)}}},
          {"M_samples", samples(v.m)}};
}

Series m_series(const BoundingFunction& m) {
  Series s{{"s", "M"}, {}};
  for (std::size_t i = 0; i < m.s.size(); ++i) s.rows.push_back({num(m.s[i]), num(m.m[i])});
  return s;
}

Json measurement_json(const DatkoMeasurement& m, const Eigen::VectorXd& x) {
  return {{"t", jnum(m.t)},
          {"x", jvec(x)},
          {"integral", jnum(m.integral)},
          {"phi_at_t", jnum(m.phi_at_t)},
          {"ratio_K", jopt(m.ratio_k)},
          {"tail_bound", jopt(m.tail_bound)},
          {"certified", m.certified},
          {"converged", m.converged},
          {"increment", jopt(m.increment)},
          {"bounded", m.bounded}};
}

void require_window(const EvolutionFamily& family, double end, const char* what) {
  if (end > family.valid_until()) {
    throw DomainError(std::string(what) + " needs the family up to t = " + num(end) +
                      " but it is valid until " + num(family.valid_until()));
  }
}

// Tail reference M_{alpha_ref} on a grid covering [0, ceil(t_end)].
TailBound tail_bound(const EvolutionFamily& family, double alpha_ref, const std::vector<double>& s_grid,
                     double horizon) {
  return TailBound{alpha_ref, bounding_function(family, alpha_ref, s_grid, horizon)};
}

// ---------------------------------------------------------------------------
// phi

void run_phi(const EvolutionFamily& family, const tasks::PhiTask& t, TaskFragment& out) {
  PhiConfig cfg = phi_config(t.alpha, t.grid);
  Json tail = nullptr;
  if (t.tail_alpha_ref) {
    cfg.tail = tail_bound(family, *t.tail_alpha_ref, t.tail_s_grid, t.grid.horizon);
    tail = {{"alpha_ref", jnum(*t.tail_alpha_ref)}, {"M_ref", samples(cfg.tail->m_ref)}};
  }
  const SampledFunction u = t.u.build();
  std::vector<PhiValue> values(t.t_grid.size());
  parallel_for(values.size(), [&](std::size_t i) { values[i] = phi(family, u, t.t_grid[i], cfg); });

  Json arr = Json::array();
  Series series{{"t", "phi_value", "arg_tau", "certified"}, {}};
  int uncertified = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const PhiValue& v = values[i];
    if (!v.certified) ++uncertified;
    arr.push_back({{"t", jnum(t.t_grid[i])},
                   {"phi", jnum(v.value)},
                   {"arg_tau", jnum(v.arg_tau)},
                   {"certified", v.certified},
                   {"tail_value", jopt(v.tail_value)},
                   {"tail_dominates", v.tail_dominates}});
    series.rows.push_back({num(t.t_grid[i]), num(v.value), num(v.arg_tau), v.certified ? "1" : "0"});
  }
  out.result = {{"alpha", jnum(t.alpha)},
                {"horizon", jnum(t.grid.horizon)},
                {"tau_step", jnum(t.grid.tau_step)},
                {"refine_depth", t.grid.refine_depth},
                {"tail", tail},
                {"values", arr},
                {"uncertified_count", uncertified}};
  if (uncertified > 0) {
    spdlog::warn("task {}: {} of {} phi values carry no truncation certificate", out.name, uncertified,
                 values.size());
  }
  if (t.continuity) {
    const auto& c = *t.continuity;
    const ContinuityReport rep = continuity_probe(family, u, cfg, c.t0, c.t1, c.steps);
    out.result["continuity"] = {{"interval", Json::array({jnum(c.t0), jnum(c.t1)})},
                                {"steps", c.steps},
                                {"delta_h", jnum(rep.delta_h)},
                                {"delta_half", jnum(rep.delta_half)},
                                {"ratio", jnum(rep.ratio)},
                                {"threshold", jnum(rep.threshold)},
                                {"pass", rep.pass},
                                {"heuristic", true}};
  }
  out.series[SeriesKind::kPhiVsT] = std::move(series);
}

// ---------------------------------------------------------------------------
// admissible

void run_admissible(const EvolutionFamily& family, const tasks::AdmissibleTask& t, TaskFragment& out) {
  const VerdictOptions opts = verdict_options(t.window);
  const auto& w = t.window;
  require_window(family, w.s_grid.back() + 2.0 * w.horizon, "admissibility window");
  Json verdicts = Json::array();
  std::optional<BoundingFunction> m_plot;
  for (const double alpha : t.alphas) {
    const auto v = admissibility_verdict(family, alpha, w.s_grid, w.horizon, opts);
    verdicts.push_back(verdict_json(v));
    if (!m_plot) m_plot = v.m;
  }
  out.result = {{"s_grid", {{"first", jnum(w.s_grid.front())},
                            {"last", jnum(w.s_grid.back())},
                            {"count", w.s_grid.size()}}},
                {"growth_threshold", jnum(w.growth_threshold)},
                {"verdicts", verdicts}};
  if (t.bracket) {
    try {
      const BoundarySearch b =
          boundary_search(family, t.bracket->first, t.bracket->second, t.tol_alpha, w.s_grid, w.horizon, opts);
      Json steps = Json::array();
      for (const auto& v : b.steps) {
        steps.push_back({{"alpha", jnum(v.alpha)},
                         {"verdict", std::string(to_string(v.verdict))},
                         {"growth_ratio", jnum(v.growth_ratio)}});
      }
      out.result["boundary"] = {{"bracket", Json::array({jnum(t.bracket->first), jnum(t.bracket->second)})},
                                {"tol_alpha", jnum(t.tol_alpha)},
                                {"boundary", jnum(b.boundary)},
                                {"lo", jnum(b.lo)},
                                {"hi", jnum(b.hi)},
                                {"inconclusive_steps", b.inconclusive_steps},
                                {"steps", steps},
                                {"hi_verdict", verdict_json(b.hi_verdict)}};
      m_plot = b.hi_verdict.m;
    } catch (const BracketError& e) {
      out.status = TaskStatus::kFailed;
      out.result["boundary"] = {{"bracket", Json::array({jnum(t.bracket->first), jnum(t.bracket->second)})},
                                {"error", e.what()}};
      spdlog::warn("task {}: {}", out.name, e.what());
    }
  }
  if (m_plot) out.series[SeriesKind::kMVsS] = m_series(*m_plot);
}

// ---------------------------------------------------------------------------
// lyapunov

void run_lyapunov(const EvolutionFamily& family, const tasks::LyapunovTask& t, TaskFragment& out) {
  require_window(family, t.t_max, "lyapunov fit");
  const LyapunovEstimate est = lyapunov_exponent(family, t.t_max, t.grid_step);
  out.result = {{"K_L", jnum(est.k_l)},
                {"fit_kind", "max_log_norm_over_t"},
                {"fit_window", Json::array({jnum(est.t_min), jnum(est.t_max)})},
                {"arg_t", jnum(est.arg_t)},
                {"residual", jnum(est.residual)},
                {"overflow", est.overflow},
                {"overflow_t", est.overflow ? jnum(est.overflow_t) : Json(nullptr)}};
  if (!t.inclusion) return;

  const auto& w = t.window;
  const VerdictOptions opts = verdict_options(w);
  require_window(family, w.s_grid.back() + 2.0 * w.horizon, "inclusion check");
  const auto above = admissibility_verdict(family, est.k_l + t.inclusion_margin, w.s_grid, w.horizon, opts);
  const auto below = admissibility_verdict(family, est.k_l - t.inclusion_margin, w.s_grid, w.horizon, opts);
  const bool pass = above.verdict == Verdict::kAdmissibleOnWindow && below.verdict == Verdict::kGrowthDetected;
  // A(U) contains (K_L, inf) only for reversible families; otherwise the
  // comparison is informational.
  const bool binding = family.reversible();
  out.result["inclusion"] = {{"label", binding ? "checked" : "reversible-only"},
                             {"margin", jnum(t.inclusion_margin)},
                             {"above", {{"alpha", jnum(above.alpha)},
                                        {"verdict", std::string(to_string(above.verdict))},
                                        {"growth_ratio", jnum(above.growth_ratio)}}},
                             {"below", {{"alpha", jnum(below.alpha)},
                                        {"verdict", std::string(to_string(below.verdict))},
                                        {"growth_ratio", jnum(below.growth_ratio)}}},
                             {"pass", pass}};
  if (binding && !pass) out.status = TaskStatus::kFailed;
}

// ---------------------------------------------------------------------------
// datko

std::vector<std::pair<double, Eigen::VectorXd>> datko_probes(const tasks::DatkoTask& t, int dim,
                                                              std::uint64_t seed, std::size_t index) {
  std::vector<std::pair<double, Eigen::VectorXd>> probes;
  for (const auto& p : t.probes) probes.emplace_back(p.t, p.x);
  if (!t.probe_times.empty()) {
    CounterRng rng(seed, index + 1);
    std::vector<Eigen::VectorXd> dirs;
    for (int i = 0; i < dim; ++i) dirs.push_back(Eigen::VectorXd::Unit(dim, i));
    for (int i = 0; i < t.random_probes; ++i) dirs.push_back(rng.unit_vector(dim));
    for (const double time : t.probe_times) {
      for (const auto& d : dirs) probes.emplace_back(time, d);
    }
  }
  return probes;
}

void run_datko(const EvolutionFamily& family, const tasks::DatkoTask& t, TaskFragment& out,
               std::uint64_t seed, std::size_t index) {
  PhiConfig cfg = phi_config(t.alpha, t.grid);
  const DatkoQuadConfig quad = quad_config(t.quad);
  const auto probes = datko_probes(t, family.dimension(), seed, index);
  double t_last = 0.0;
  for (const auto& p : probes) t_last = std::max(t_last, p.first);
  require_window(family, t_last + t.quad.t_int + t.grid.horizon, "datko integral");
  if (t.tail_alpha_ref) {
    const auto s = uniform_grid(0.0, std::ceil(t_last + t.quad.t_int), 0.25);
    cfg.tail = tail_bound(family, *t.tail_alpha_ref, s, t.grid.horizon);
  }
  out.result = {{"p", jnum(t.p)}, {"alpha", jnum(t.alpha)}, {"t_int", jnum(t.quad.t_int)},
                {"probe_count", probes.size()}};

  std::vector<DatkoMeasurement> ms;
  if (t.alpha < 0.0) {
    const auto& w = t.window;
    require_window(family, w.s_grid.back() + 2.0 * w.horizon, "admissibility precondition");
    const auto pre = admissibility_verdict(family, t.alpha, w.s_grid, w.horizon, verdict_options(w));
    out.result["precondition"] = {{"alpha", jnum(t.alpha)},
                                  {"verdict", std::string(to_string(pre.verdict))},
                                  {"growth_ratio", jnum(pre.growth_ratio)}};
    const NecessityReport rep = necessity_check(family, t.p, probes, cfg, quad, t.slack);
    ms = rep.measurements;
    if (pre.verdict == Verdict::kAdmissibleOnWindow) {
      out.result["necessity"] = {{"bound", jnum(rep.bound)},
                                 {"max_ratio_K", jnum(rep.max_ratio)},
                                 {"slack", jnum(rep.slack)},
                                 {"worst_t", jnum(rep.worst_t)},
                                 {"worst_x", jvec(rep.worst_x)},
                                 {"pass", rep.pass}};
      if (!rep.pass) out.status = TaskStatus::kFailed;
    } else {
      out.result["necessity"] = {{"skipped", true},
                                 {"reason", "alpha is not admissible on the window"},
                                 {"max_ratio_K", jnum(rep.max_ratio)}};
      out.status = TaskStatus::kFailed;
    }
  } else {
    ms.resize(probes.size());
    parallel_for(probes.size(), [&](std::size_t i) {
      const auto u = SampledFunction::constant(probes[i].second);
      ms[i] = datko_integral(family, u, t.p, probes[i].first, cfg, quad);
    });
    out.result["necessity"] = {{"skipped", true}, {"reason", "alpha >= 0"}};
  }

  Json arr = Json::array();
  int uncertified = 0;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    if (!ms[i].certified) ++uncertified;
    arr.push_back(measurement_json(ms[i], probes[i].second));
  }
  out.result["uncertified_count"] = uncertified;
  out.result["measurements"] = arr;
}

// ---------------------------------------------------------------------------
// certify

void run_certify(const EvolutionFamily& family, const tasks::CertifyTask& t, TaskFragment& out,
                 std::uint64_t seed, std::size_t index) {
  const PhiConfig cfg = phi_config(t.alpha, t.grid);
  const DatkoQuadConfig quad = quad_config(t.quad);
  require_window(family, t.probe_times.back() + 2.0 * t.quad.t_int + t.grid.horizon, "K validation");
  require_window(family, std::max(t.verify_grid.back(), t.probe_times.back()) + t.m_horizon, "M_ref");

  ProbeSuite suite;
  suite.times = t.probe_times;
  const int dim = family.dimension();
  CounterRng rng(seed, index + 1);
  for (int i = 0; i < dim; ++i) suite.directions.push_back(Eigen::VectorXd::Unit(dim, i));
  for (int i = 0; i < t.random_probes; ++i) suite.directions.push_back(rng.unit_vector(dim));

  std::vector<double> s_all = t.verify_grid;
  s_all.insert(s_all.end(), t.probe_times.begin(), t.probe_times.end());
  std::sort(s_all.begin(), s_all.end());
  s_all.erase(std::unique(s_all.begin(), s_all.end()), s_all.end());
  const BoundingFunction m_ref = bounding_function(family, t.alpha, s_all, t.m_horizon);

  const DatkoConstant k = measure_datko_constant(family, t.p, suite, m_ref, cfg, quad);
  out.result = {{"p", jnum(t.p)}, {"alpha", jnum(t.alpha)}, {"delta", jnum(t.delta)}};
  out.result["K_validation"] = {{"K", jnum(k.k)},
                                {"bounded", k.bounded},
                                {"growth_tol", jnum(t.quad.growth_tol)},
                                {"max_increment_ratio", jnum(k.max_increment_ratio)},
                                {"probes", k.probes},
                                {"worst_t", jnum(k.worst_t)},
                                {"worst_x", jvec(k.worst_x)}};
  if (!k.bounded || !(k.k > 0.0)) {
    out.status = TaskStatus::kFailed;
    out.result["K_validation"]["status"] = "FAILED";
    out.result["certificate"] = nullptr;
    spdlog::warn("task {}: K validation failed (Datko integral keeps growing)", out.name);
    return;
  }
  out.result["K_validation"]["status"] = "PASSED";

  const StabilityCertificate c =
      build_certificate(family, t.p, k.k, t.alpha, t.delta, m_ref, t.verify_grid, t.verify_grid);
  out.result["certificate"] = {{"p", jnum(c.p)},
                               {"alpha", jnum(c.alpha)},
                               {"K", jnum(c.k)},
                               {"N", jnum(c.constants.n)},
                               {"delta", jnum(c.delta)},
                               {"N_tilde", jnum(c.constants.n_tilde)},
                               {"rate", jnum(c.constants.rate)},
                               {"status", c.passed ? "PASSED" : "FAILED"},
                               {"worst_pair", Json::array({jnum(c.worst_pair.first), jnum(c.worst_pair.second)})},
                               {"margin", jnum(c.margin)},
                               {"violations", c.violations},
                               {"pairs", c.verification.size()},
                               {"M_ref", samples(c.m_ref)}};
  if (!c.passed) out.status = TaskStatus::kFailed;

  Series s{{"t-s", "measured_norm", "certified_bound"}, {}};
  for (const auto& v : c.verification) s.rows.push_back({num(v.t - v.s), num(v.norm), num(v.bound)});
  out.series[SeriesKind::kNormVsCertificate] = std::move(s);
}

// ---------------------------------------------------------------------------
// verify-props

struct SuiteResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  double worst = -std::numeric_limits<double>::infinity();  // residual or excess; see `measure`
  std::string measure;
  double tolerance = 0.0;
  Json worst_case = nullptr;
  bool heuristic = false;
  std::string skipped;

  void record(double value, bool ok, Json where) {
    ++cases;
    if (!ok) ++failures;
    if (value > worst || worst_case.is_null()) {
      worst = value;
      worst_case = std::move(where);
    }
  }

  Json json() const {
    Json j = {{"suite", name}};
    if (!skipped.empty()) {
      j["skipped"] = skipped;
      return j;
    }
    j["cases"] = cases;
    j["failures"] = failures;
    j["measure"] = measure;
    j["worst"] = cases > 0 ? jnum(worst) : Json(nullptr);
    j["tolerance"] = jnum(tolerance);
    j["worst_case"] = worst_case;
    j["heuristic"] = heuristic;
    j["pass"] = failures == 0;
    return j;
  }
};

class PropsRunner {
 public:
  PropsRunner(const EvolutionFamily& family, const tasks::PropsTask& t, std::uint64_t seed, std::size_t index)
      : family_(family), t_(t), rng_(seed, index + 1), cfg_(phi_config(t.alpha, t.grid)) {}

  // Random smooth u: a constant vector or c_i + a_i cos(w_i t + b_i) per component.
  SampledFunction random_u() {
    const int n = family_.dimension();
    if (rng_.uniform() < 0.5) return SampledFunction::constant(rng_.uniform(0.5, 2.0) * rng_.unit_vector(n));
    std::vector<Expr> comps;
    for (int i = 0; i < n; ++i) {
      const Expr t = Expr::variable();
      const Expr arg = Expr::binary(Expr::Op::kAdd, Expr::binary(Expr::Op::kMul, Expr::constant(rng_.uniform(0.2, 2.0)), t),
                                    Expr::constant(rng_.uniform(0.0, 6.28)));
      comps.push_back(Expr::binary(
          Expr::Op::kAdd, Expr::constant(rng_.uniform(-1.0, 1.0)),
          Expr::binary(Expr::Op::kMul, Expr::constant(rng_.uniform(0.5, 1.5)), Expr::unary(Expr::Op::kCos, arg))));
    }
    return SampledFunction::closed_form(std::move(comps));
  }

  double time() { return rng_.uniform(0.0, t_.t_max); }

  std::pair<double, double> ordered_pair() {
    double a = time(), b = time();
    if (a < b) std::swap(a, b);
    return {a, b};  // t >= s
  }

  SuiteResult run(const std::string& name) {
    SuiteResult r;
    r.name = name;
    const double tol_family = family_.cocycle_tolerance();
    const int n = t_.cases;
    if (name == "cocycle") {
      r.measure = "relative residual";
      r.tolerance = tol_family;
      for (int i = 0; i < n; ++i) {
        double a[3] = {time(), time(), time()};
        std::sort(a, a + 3);
        const TimeTriple tr{a[2], a[1], a[0]};
        const std::vector<Eigen::VectorXd> x = {rng_.unit_vector(family_.dimension())};
        const auto rep = check_cocycle(family_, std::span(&tr, 1), x, tol_family);
        r.record(rep.max_residual, rep.pass, Json::array({jnum(tr.t), jnum(tr.tau), jnum(tr.s)}));
      }
    } else if (name == "reversibility") {
      if (!family_.reversible()) {
        r.skipped = "family is not reversible";
        return r;
      }
      r.measure = "relative residual";
      r.tolerance = tol_family;
      for (int i = 0; i < n; ++i) {
        const auto [t, s] = ordered_pair();
        const Eigen::VectorXd x = rng_.unit_vector(family_.dimension());
        const Eigen::VectorXd y = apply(family_, t, s, x);
        const Eigen::VectorXd back = apply(family_, s, t, y);
        const double res = vector_norm(family_, Eigen::VectorXd(back - x)) /
                           std::max(vector_norm(family_, x), vector_norm(family_, y));
        r.record(res, res <= tol_family, Json::array({jnum(t), jnum(s)}));
      }
    } else if (name == "projection") {
      r.measure = "relative residual";
      r.tolerance = tol_family;
      for (int i = 0; i < n; ++i) {
        const auto pr = ordered_pair();
        const auto rep = check_projection_algebra(family_, random_u(), std::span(&pr, 1));
        r.record(rep.max_residual, rep.pass, Json::array({jnum(pr.first), jnum(pr.second)}));
      }
    } else if (name == "fixpoint") {
      r.measure = "absolute difference minus tolerance";
      for (int i = 0; i < n; ++i) {
        const double t = time();
        const auto rep = check_phi_fixpoint(family_, random_u(), t, cfg_);
        r.record(rep.difference - rep.tolerance, rep.pass, jnum(t));
      }
    } else if (name == "decay_lemma") {
      r.measure = "excess over slack";
      for (int i = 0; i < n; ++i) {
        double a[3] = {time(), time(), time()};
        std::sort(a, a + 3);
        const std::pair<double, double> pr{a[2], a[1]};
        const auto rep = check_decay_lemma(family_, random_u(), a[0], std::span(&pr, 1), cfg_);
        r.record(rep.worst_excess, rep.pass, Json::array({jnum(a[2]), jnum(a[1]), jnum(a[0])}));
      }
    } else if (name == "phi_t_bound") {
      if (!(t_.alpha < 0.0)) {
        r.skipped = "needs alpha < 0";
        return r;
      }
      r.measure = "(lhs - rhs - slack) / rhs";
      const auto grid = norm_grid(t_.t_norm, t_.norm_step);
      for (int i = 0; i < std::min(n, 5); ++i) {
        const double t = rng_.uniform(0.0, 0.5 * t_.t_max);
        const auto rep = check_phi_t_bound(family_, random_u(), t, grid, cfg_);
        r.record((rep.lhs - rep.rhs - rep.slack) / std::max(rep.rhs, 1e-300), rep.pass, jnum(t));
      }
    } else if (name == "sandwich") {
      r.measure = "relative excess";
      r.tolerance = 2.0 * cfg_.rel_tol;
      for (int i = 0; i < n; ++i) {
        const double t = time();
        const SampledFunction u = random_u();
        const double un = vector_norm(family_, u(t));
        const double v = phi(family_, u, t, cfg_).value;
        const std::vector<double> at = {t};
        WindowOptions wo;
        wo.t_step = cfg_.tau_step;
        wo.refine_depth = cfg_.refine_depth;
        const double m = bounding_function(family_, t_.alpha, at, cfg_.horizon, wo).m[0];
        const double upper = m * un;
        const double lower_excess = un > 0.0 ? (un - v) / un : 0.0;
        const double upper_excess = upper > 0.0 ? (v - upper) / upper : 0.0;
        const double e = std::max(lower_excess, upper_excess);
        r.record(e, v >= un && upper_excess <= r.tolerance, jnum(t));
      }
    } else if (name == "alpha_monotonicity") {
      r.measure = "relative excess";
      PhiConfig flat = cfg_;
      flat.refine_depth = 0;
      for (int i = 0; i < n; ++i) {
        const double t = time();
        const SampledFunction u = random_u();
        PhiConfig beta = flat;
        beta.alpha = flat.alpha + rng_.uniform(0.1, 1.0);
        const double va = phi(family_, u, t, flat).value;
        const double vb = phi(family_, u, t, beta).value;
        const double e = va > 0.0 ? (vb - va) / va : 0.0;
        r.record(e, vb <= va, Json::array({jnum(t), jnum(beta.alpha)}));
      }
    } else if (name == "grid_refinement") {
      r.measure = "relative decrease";
      r.tolerance = tol_family;
      PhiConfig coarse = cfg_;
      coarse.refine_depth = 0;
      PhiConfig fine = coarse;
      fine.tau_step = coarse.tau_step / 2.0;
      for (int i = 0; i < n; ++i) {
        const double t = time();
        const SampledFunction u = random_u();
        const double vc = phi(family_, u, t, coarse).value;
        const double vf = phi(family_, u, t, fine).value;
        const double e = vc > 0.0 ? (vc - vf) / vc : 0.0;
        r.record(e, e <= tol_family, jnum(t));
      }
    } else if (name == "homogeneity") {
      r.measure = "relative difference";
      r.tolerance = 1e-12;
      for (int i = 0; i < n; ++i) {
        const double t = time();
        const double c = rng_.uniform(-3.0, 3.0);
        const SampledFunction u = random_u();
        const double v = phi(family_, u, t, cfg_).value;
        const double vc = phi(family_, c * u, t, cfg_).value;
        const double ref = std::abs(c) * v;
        const double e = ref > 0.0 ? std::abs(vc - ref) / ref : std::abs(vc);
        r.record(e, e <= r.tolerance, Json::array({jnum(t), jnum(c)}));
      }
    } else if (name == "linearity") {
      r.measure = "relative residual";
      r.tolerance = tol_family;
      for (int i = 0; i < n; ++i) {
        const double t = time();
        const double a = rng_.uniform(-2.0, 2.0), b = rng_.uniform(-2.0, 2.0);
        const SampledFunction u = random_u(), v = random_u();
        const PhiTOperator op{family_, t};
        const SampledFunction lhs = apply_phi_t(op, a * u + b * v);
        const SampledFunction pu = apply_phi_t(op, u), pv = apply_phi_t(op, v);
        double res = 0.0;
        for (int k = 0; k <= 20; ++k) {
          const double tau = (t + 5.0) * k / 20.0;
          const Eigen::VectorXd l = lhs(tau);
          const Eigen::VectorXd rr = a * pu(tau) + b * pv(tau);
          const double scale = std::max({vector_norm(family_, l), std::abs(a) * vector_norm(family_, pu(tau)),
                                         std::abs(b) * vector_norm(family_, pv(tau)), 1e-300});
          res = std::max(res, vector_norm(family_, Eigen::VectorXd(l - rr)) / scale);
        }
        r.record(res, res <= tol_family, Json::array({jnum(t), jnum(a), jnum(b)}));
      }
    } else if (name == "W_additivity") {
      if (!(t_.alpha < 0.0)) {
        r.skipped = "needs alpha < 0";
        return r;
      }
      r.measure = "residual / scale";
      r.tolerance = 1e-6;
      const DatkoQuadConfig quad = quad_config(t_.quad);
      for (int i = 0; i < n; ++i) {
        double t0 = rng_.uniform(0.0, 5.0), t = rng_.uniform(0.0, 5.0);
        if (t < t0) std::swap(t, t0);
        const SampledFunction u = apply_phi_t(PhiTOperator{family_, t0}, random_u());
        const auto rep = check_W_additivity(family_, u, t_.p, t0, t, cfg_, quad, r.tolerance);
        r.record(rep.scale > 0.0 ? rep.residual / rep.scale : rep.residual, rep.pass,
                 Json::array({jnum(t0), jnum(t)}));
      }
    } else if (name == "continuity") {
      r.measure = "delta_half / delta_h";
      r.heuristic = true;
      const double t1 = std::min(6.283185307179586, t_.t_max);
      const auto rep = continuity_probe(family_, random_u(), cfg_, 0.0, t1, 32);
      r.tolerance = rep.threshold;
      r.record(rep.ratio, rep.pass, Json::array({0.0, jnum(t1)}));
    }
    return r;
  }

 private:
  EvolutionFamily family_;
  const tasks::PropsTask& t_;
  CounterRng rng_;
  PhiConfig cfg_;
};

std::vector<std::string> default_suites(const EvolutionFamily& family, const tasks::PropsTask& t) {
  std::vector<std::string> s = {"cocycle", "projection", "fixpoint", "decay_lemma", "sandwich",
                                "alpha_monotonicity", "grid_refinement", "homogeneity", "linearity"};
  if (family.reversible()) s.insert(s.begin() + 1, "reversibility");
  if (t.alpha < 0.0) {
    s.push_back("phi_t_bound");
    s.push_back("W_additivity");
  }
  return s;
}

void run_props(const EvolutionFamily& family, const tasks::PropsTask& t, TaskFragment& out,
               std::uint64_t seed, std::size_t index) {
  const auto suites = t.suites.empty() ? default_suites(family, t) : t.suites;
  double reach = t.t_max + 5.0 + 2.0 * t.grid.horizon;
  for (const auto& s : suites) {
    if (s == "phi_t_bound") reach = std::max(reach, t.t_norm + t.grid.horizon + t.t_max);
    if (s == "W_additivity") reach = std::max(reach, 5.0 + t.quad.t_int + t.grid.horizon);
  }
  require_window(family, reach, "property suites");

  PropsRunner runner(family, t, seed, index);
  Json arr = Json::array();
  int failing = 0;
  for (const auto& s : suites) {
    const SuiteResult r = runner.run(s);
    if (r.failures > 0 && !r.heuristic) {
      ++failing;
      spdlog::warn("task {}: suite {} failed {} of {} cases", out.name, s, r.failures, r.cases);
    }
    arr.push_back(r.json());
  }
  out.result = {{"alpha", jnum(t.alpha)}, {"p", jnum(t.p)}, {"cases", t.cases}, {"t_max", jnum(t.t_max)},
                {"suites", arr}, {"failing_suites", failing}};
  if (failing > 0) out.status = TaskStatus::kFailed;
}

Json family_json(const EvolutionFamily& family) {
  Json caveats = Json::array();
  if (const auto* tab = std::get_if<TabulatedFamily>(&family.backend())) {
    caveats.push_back("values between table nodes are linear interpolations");
    if (tab->layout() == TabulatedFamily::Layout::kPairGrid) {
      caveats.push_back("cocycle identity holds only to interpolation accuracy");
    }
  }
  const double until = family.valid_until();
  return {{"kind", std::string(family.kind())},
          {"dimension", family.dimension()},
          {"norm", std::string(to_string(family.norm()))},
          {"reversible", family.reversible()},
          {"valid_until", std::isfinite(until) ? Json(until) : Json(nullptr)},
          {"cocycle_tolerance", jnum(family.cocycle_tolerance())},
          {"caveats", caveats}};
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

}  // namespace

std::string_view to_string(SeriesKind kind) {
  switch (kind) {
    case SeriesKind::kPhiVsT: return "phi_vs_t";
    case SeriesKind::kMVsS: return "M_vs_s";
    case SeriesKind::kNormVsCertificate: return "norm_vs_certificate";
  }
  return "unknown";
}

std::string_view to_string(TaskStatus status) {
  switch (status) {
    case TaskStatus::kOk: return "ok";
    case TaskStatus::kFailed: return "failed";
    case TaskStatus::kError: return "error";
  }
  return "unknown";
}

void emit_plot_series(const TaskFragment& fragment, SeriesKind kind, const std::filesystem::path& file) {
  const auto it = fragment.series.find(kind);
  if (it == fragment.series.end()) {
    throw std::invalid_argument("task '" + fragment.name + "' has no " + std::string(to_string(kind)) +
                                " series");
  }
  std::string text;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text += ',';
      text += cells[i];
    }
    text += '\n';
  };
  line(it->second.header);
  for (const auto& row : it->second.rows) line(row);
  write_text(file, text);
}

TaskFragment run_task(const EvolutionFamily& family, const Json& block, std::uint64_t seed, std::size_t index) {
  const tasks::Task task = tasks::parse_task(block, index, family.dimension());
  TaskFragment out;
  out.name = task.name;
  out.kind = task.kind;
  const auto start = std::chrono::steady_clock::now();
  try {
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, tasks::PhiTask>) run_phi(family, p, out);
          else if constexpr (std::is_same_v<P, tasks::AdmissibleTask>) run_admissible(family, p, out);
          else if constexpr (std::is_same_v<P, tasks::LyapunovTask>) run_lyapunov(family, p, out);
          else if constexpr (std::is_same_v<P, tasks::DatkoTask>) run_datko(family, p, out, seed, index);
          else if constexpr (std::is_same_v<P, tasks::CertifyTask>) run_certify(family, p, out, seed, index);
          else run_props(family, p, out, seed, index);
        },
        task.params);
  } catch (const std::exception& e) {
    out.status = TaskStatus::kError;
    out.result = {{"error", e.what()}};
    out.series.clear();
    spdlog::error("task {} ({}): {}", out.name, out.kind, e.what());
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  spdlog::info("task {} ({}) {} in {:.2f} s", out.name, out.kind, to_string(out.status), out.wall_seconds);
  return out;
}

RunResult run(const RunConfig& config, const RunOptions& options) {
  RunResult res;
  const std::uint64_t seed = options.seed.value_or(config.seed);
  res.output_dir = options.out_dir.value_or(config.output_dir);
  const EvolutionFamily family = build_family(config.raw.at("family"), config.base_dir);

  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < config.tasks.size(); ++i) {
    if (options.props_only && config.tasks[i].at("kind") != "verify-props") continue;
    selected.push_back(i);
  }

  res.fragments.resize(selected.size());
  if (options.parallel && selected.size() > 1) {
    std::vector<std::future<TaskFragment>> futures;
    for (const std::size_t i : selected) {
      futures.push_back(std::async(std::launch::async, [&, i] { return run_task(family, config.tasks[i], seed, i); }));
    }
    for (std::size_t k = 0; k < futures.size(); ++k) res.fragments[k] = futures[k].get();
  } else {
    for (std::size_t k = 0; k < selected.size(); ++k) {
      res.fragments[k] = run_task(family, config.tasks[selected[k]], seed, selected[k]);
    }
  }

  std::filesystem::create_directories(res.output_dir);
  Json tasks_json = Json::array();
  Json timings = Json::object();
  int failed = 0, errors = 0, phi_uncertified = 0, datko_uncertified = 0;
  for (const auto& f : res.fragments) {
    Json files = Json::array();
    for (const auto& [kind, _] : f.series) {
      const std::string file = f.name + "_" + std::string(to_string(kind)) + ".csv";
      emit_plot_series(f, kind, res.output_dir / file);
      files.push_back(file);
    }
    if (f.status == TaskStatus::kFailed) ++failed;
    if (f.status == TaskStatus::kError) ++errors;
    if (f.kind == "phi" && f.result.contains("uncertified_count")) {
      phi_uncertified += f.result["uncertified_count"].get<int>();
    }
    if (f.kind == "datko" && f.result.contains("uncertified_count")) {
      datko_uncertified += f.result["uncertified_count"].get<int>();
    }
    tasks_json.push_back({{"name", f.name},
                          {"kind", f.kind},
                          {"status", std::string(to_string(f.status))},
                          {"series", files},
                          {"result", f.result}});
    timings[f.name] = f.wall_seconds;
  }
  res.exit_code = errors > 0 ? 1 : failed > 0 ? 2 : 0;

  res.report = {{"tool", "datko-lab"},
                {"versions", {{"datko-lab", kVersion}, {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                                                     std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                                                     std::to_string(EIGEN_MINOR_VERSION)},
                              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
                {"seed", seed},
                {"config", config.raw},
                {"family", family_json(family)},
                {"tasks", tasks_json},
                {"summary", {{"tasks", res.fragments.size()},
                             {"failed", failed},
                             {"errors", errors},
                             {"phi_uncertified", phi_uncertified},
                             {"datko_uncertified", datko_uncertified},
                             {"exit_code", res.exit_code}}}};
  write_text(res.output_dir / "report.json", res.report.dump(2) + "\n");
  write_text(res.output_dir / "timings.json", Json{{"wall_seconds", timings}}.dump(2) + "\n");
  return res;
}

}  // namespace datko
