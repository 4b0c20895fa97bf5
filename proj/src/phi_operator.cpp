#include "datko/phi_operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace datko {

SampledFunction apply_phi_t(const PhiTOperator& op, const SampledFunction& u) {
  return SampledFunction::cut(op.family, op.cut_time, u);
}

std::vector<double> norm_grid(double t_norm, double step, std::span<const double> extra) {
  if (!(t_norm >= 0.0) || !(step > 0.0)) throw std::invalid_argument("norm_grid: bad window");
  std::vector<double> grid;
  const auto n = static_cast<long long>(std::floor(t_norm / step + 1e-9));
  for (long long k = 0; k <= n; ++k) grid.push_back(static_cast<double>(k) * step);
  grid.insert(grid.end(), extra.begin(), extra.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

CAlphaNorm c_alpha_norm(const EvolutionFamily& family, const SampledFunction& u,
                        std::span<const double> grid, const PhiConfig& cfg) {
  if (grid.empty()) throw std::invalid_argument("c_alpha_norm: empty grid");
  CAlphaNorm out;
  out.alpha = cfg.alpha;
  out.grid.assign(grid.begin(), grid.end());
  out.arg_t = grid.front();
  for (const double t : grid) {
    const double v = phi(family, u, t, cfg).value;
    if (v > out.value) {
      out.value = v;
      out.arg_t = t;
    }
  }
  return out;
}

ProjectionReport check_projection_algebra(const EvolutionFamily& family, const SampledFunction& u,
                                          std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("check_projection_algebra: empty pair list");
  ProjectionReport rep;
  rep.tolerance = family.cocycle_tolerance();
  for (const auto& [t, s] : pairs) {
    if (!(t >= s) || !(s >= 0.0)) {
      throw std::invalid_argument("check_projection_algebra: pairs need t >= s >= 0");
    }
    const auto phi_s = apply_phi_t({family, s}, u);
    const auto phi_t = apply_phi_t({family, t}, u);
    const auto ts = apply_phi_t({family, t}, phi_s);
    const auto st = apply_phi_t({family, s}, phi_t);
    const auto tt = apply_phi_t({family, t}, phi_t);

    const double end = std::min(t + 5.0, ts.domain_end());
    std::vector<double> grid;
    for (int i = 0; i <= 40; ++i) grid.push_back(end * i / 40.0);
    grid.push_back(s);
    grid.push_back(t);

    const double base = std::max(vector_norm(family, u(s)), vector_norm(family, u(t)));
    auto residual = [&](const SampledFunction& a, const SampledFunction& b, double tau) {
      const Eigen::VectorXd vb = b(tau);
      double scale = std::max(base, vector_norm(family, vb));
      if (scale == 0.0) scale = 1.0;
      return vector_norm(family, a(tau) - vb) / scale;
    };
    for (const double tau : grid) {
      const double r1 = residual(ts, phi_s, tau);
      const double r2 = residual(st, phi_s, tau);
      const double r3 = residual(tt, phi_t, tau);
      rep.absorb_ts = std::max(rep.absorb_ts, r1);
      rep.absorb_st = std::max(rep.absorb_st, r2);
      rep.idempotent = std::max(rep.idempotent, r3);
      const double r = std::max({r1, r2, r3});
      if (r > rep.max_residual) {
        rep.max_residual = r;
        rep.worst_pair = {t, s};
      }
    }
  }
  rep.pass = rep.max_residual <= rep.tolerance;
  return rep;
}

EqualityReport check_phi_fixpoint(const EvolutionFamily& family, const SampledFunction& u, double t,
                                  const PhiConfig& cfg) {
  EqualityReport rep;
  rep.lhs = phi(family, apply_phi_t({family, t}, u), t, cfg).value;
  rep.rhs = phi(family, u, t, cfg).value;
  rep.difference = std::abs(rep.lhs - rep.rhs);
  rep.tolerance = 4.0 * std::numeric_limits<double>::epsilon() * std::max(rep.lhs, rep.rhs);
  rep.pass = rep.difference <= rep.tolerance;
  return rep;
}

InequalityReport check_decay_lemma(const EvolutionFamily& family, const SampledFunction& u, double s,
                                   std::span<const std::pair<double, double>> pairs,
                                   const PhiConfig& cfg) {
  InequalityReport rep;
  const auto cut = apply_phi_t({family, s}, u);
  for (const auto& [t, xi] : pairs) {
    if (!(t >= xi) || !(xi >= s)) throw std::invalid_argument("check_decay_lemma: need t >= xi >= s");
    PhiConfig wide = cfg;
    wide.horizon = cfg.horizon + (t - xi);
    const double lhs = phi(family, cut, t, cfg).value;
    const double rhs = std::exp(cfg.alpha * (t - xi)) * phi(family, cut, xi, wide).value;
    const double slack = 2.0 * cfg.rel_tol * std::max(lhs, rhs);
    ++rep.cases;
    rep.max_margin = std::max(rep.max_margin, lhs - rhs);
    if (lhs - rhs - slack > rep.worst_excess) {
      rep.worst_excess = lhs - rhs - slack;
      rep.worst = {t, xi, s};
    }
    if (lhs - rhs > slack) ++rep.failures;
  }
  rep.pass = rep.failures == 0;
  return rep;
}

PhiTBoundReport check_phi_t_bound(const EvolutionFamily& family, const SampledFunction& u, double t,
                                  std::span<const double> grid, const PhiConfig& cfg) {
  if (!(cfg.alpha < 0.0)) throw std::invalid_argument("check_phi_t_bound: alpha must be negative");
  std::vector<double> g(grid.begin(), grid.end());
  if (std::find(g.begin(), g.end(), t) == g.end()) {
    g.push_back(t);
    std::sort(g.begin(), g.end());
  }
  PhiTBoundReport rep;
  rep.lhs = c_alpha_norm(family, apply_phi_t({family, t}, u), g, cfg).value;
  rep.rhs = std::exp(-cfg.alpha * t) * c_alpha_norm(family, u, g, cfg).value;
  rep.slack = 2.0 * cfg.rel_tol * std::max(rep.lhs, rep.rhs);
  rep.pass = rep.lhs <= rep.rhs + rep.slack;
  return rep;
}

}  // namespace datko
