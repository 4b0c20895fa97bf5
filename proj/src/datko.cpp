#include "datko/datko.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "datko/parallel.hpp"
#include "datko/phi_operator.hpp"
#include "datko/random.hpp"

namespace datko {

namespace {

void require_p(double p) {
  if (!(p > 0.0) || !std::isfinite(p)) throw std::invalid_argument("Datko exponent p must be positive");
}

}  // namespace

DatkoMeasurement datko_integral(const EvolutionFamily& family, const SampledFunction& u, double p,
                                double t, const PhiConfig& cfg, const DatkoQuadConfig& quad,
                                bool check_bounded) {
  require_p(p);
  if (!(quad.t_int > 0.0)) throw std::invalid_argument("datko_integral: t_int must be positive");
  DatkoMeasurement m;
  m.p = p;
  m.alpha = cfg.alpha;
  m.t = t;
  m.t_int = quad.t_int;
  const Eigen::VectorXd x = u(t);
  const double xn = vector_norm(family, x);
  if (xn == 0.0) {
    m.certified = true;
    if (check_bounded) m.increment = 0.0;
    return m;
  }

  const double span = quad.t_int * (check_bounded ? 2.0 : 1.0) + cfg.horizon;
  const PhiProfile profile(family, t, x, span, cfg);
  auto integrand = [&](double xi) { return std::pow(profile.at(xi).value, p); };

  const auto r = simpson_richardson(integrand, t, t + quad.t_int, quad.quad);
  m.integral = r.value;
  m.converged = r.converged;
  m.last_estimate = r.last;
  m.previous_estimate = r.previous;
  m.phi_at_t = profile.at(t).value;
  if (m.phi_at_t > 0.0) m.ratio_k = m.integral / std::pow(m.phi_at_t, p);

  if (check_bounded) {
    const auto inc = simpson_richardson(integrand, t + quad.t_int, t + 2.0 * quad.t_int, quad.quad);
    m.increment = inc.value;
    m.converged = m.converged && inc.converged;
    m.bounded = inc.value <= quad.growth_tol * m.integral;
  }

  // phi(xi, u) <= M_ref(t) ||u(t)|| e^{alpha_ref (xi - t)} for xi >= t, so the
  // rest of the integral is at most (M_ref ||u(t)||)^p e^{p alpha_ref T} / (-p alpha_ref)
  if (cfg.tail.has_value() && cfg.tail->alpha_ref < 0.0) {
    if (const auto mr = cfg.tail->m_ref.lookup(t)) {
      const double a = cfg.tail->alpha_ref;
      m.tail_bound = std::pow(*mr * xn, p) * std::exp(p * a * quad.t_int) / (-p * a);
      m.certified = m.converged && *m.tail_bound <= cfg.rel_tol * m.integral;
    }
  }
  return m;
}

NecessityReport necessity_check(const EvolutionFamily& family, double p,
                                std::span<const std::pair<double, Eigen::VectorXd>> probes,
                                const PhiConfig& cfg, const DatkoQuadConfig& quad, double slack) {
  require_p(p);
  if (!(cfg.alpha < 0.0)) throw std::invalid_argument("necessity_check: alpha must be negative");
  if (probes.empty()) throw std::invalid_argument("necessity_check: no probes");
  NecessityReport rep;
  rep.p = p;
  rep.alpha = cfg.alpha;
  rep.bound = 1.0 / (-p * cfg.alpha);
  rep.slack = slack;
  rep.measurements.resize(probes.size());
  parallel_for(probes.size(), [&](std::size_t i) {
    const auto& [t, x] = probes[i];
    const auto u = apply_phi_t({family, t}, SampledFunction::constant(x));
    rep.measurements[i] = datko_integral(family, u, p, t, cfg, quad);
  });
  rep.max_ratio = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto& m = rep.measurements[i];
    if (!m.ratio_k.has_value()) continue;
    ++rep.probes;
    if (*m.ratio_k > rep.max_ratio) {
      rep.max_ratio = *m.ratio_k;
      rep.worst_t = probes[i].first;
      rep.worst_x = probes[i].second;
    }
  }
  rep.pass = rep.probes > 0 && rep.max_ratio <= rep.bound + slack;
  return rep;
}

ProbeSuite default_probe_suite(int dimension, double t_end, std::uint64_t seed, int time_count,
                               int random_count) {
  if (dimension < 1 || time_count < 1 || random_count < 0) {
    throw std::invalid_argument("default_probe_suite: bad sizes");
  }
  ProbeSuite suite;
  for (int i = 0; i < time_count; ++i) {
    suite.times.push_back(time_count == 1 ? 0.0 : t_end * i / (time_count - 1));
  }
  for (int i = 0; i < dimension; ++i) suite.directions.push_back(Eigen::VectorXd::Unit(dimension, i));
  CounterRng rng(seed, 0xd17c0);
  for (int i = 0; i < random_count; ++i) suite.directions.push_back(rng.unit_vector(dimension));
  return suite;
}

DatkoConstant measure_datko_constant(const EvolutionFamily& family, double p, const ProbeSuite& suite,
                                     const BoundingFunction& m, const PhiConfig& cfg,
                                     const DatkoQuadConfig& quad) {
  require_p(p);
  const std::size_t nd = suite.directions.size();
  const std::size_t total = suite.times.size() * nd;
  if (total == 0) throw std::invalid_argument("measure_datko_constant: empty probe suite");
  DatkoConstant out;
  out.measurements.resize(total);
  parallel_for(total, [&](std::size_t i) {
    const double t = suite.times[i / nd];
    const auto mt = m.lookup(t);
    if (!mt.has_value()) {
      throw std::invalid_argument("measure_datko_constant: no M sample covers t = " + std::to_string(t));
    }
    // Step-4 probe u_x(t) = x / M(t)
    const Eigen::VectorXd ux = suite.directions[i % nd] / *mt;
    const auto u = apply_phi_t({family, t}, SampledFunction::constant(ux));
    out.measurements[i] = datko_integral(family, u, p, t, cfg, quad, true);
  });
  for (std::size_t i = 0; i < total; ++i) {
    const auto& ms = out.measurements[i];
    if (!ms.ratio_k.has_value()) continue;
    ++out.probes;
    out.bounded = out.bounded && ms.bounded && ms.converged;
    if (ms.integral > 0.0) {
      out.max_increment_ratio = std::max(out.max_increment_ratio, *ms.increment / ms.integral);
    }
    if (*ms.ratio_k > out.k) {
      out.k = *ms.ratio_k;
      out.worst_t = suite.times[i / nd];
      out.worst_x = suite.directions[i % nd];
    }
  }
  if (out.probes == 0) out.bounded = false;
  return out;
}

CertificateConstants certificate_constants(double p, double alpha, double k, double delta) {
  require_p(p);
  if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("certificate: K must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("certificate: delta must lie in (0,1)");
  const double e = std::exp(p * alpha);
  CertificateConstants c;
  c.n = std::max(e * k, e);
  c.rate = delta / (p * c.n);
  c.n_tilde = std::pow(c.n / (1.0 - delta), 1.0 / p);
  return c;
}

StabilityCertificate build_certificate(const EvolutionFamily& family, double p, double k_measured,
                                       double alpha, double delta, const BoundingFunction& m_ref,
                                       std::span<const double> t_grid, std::span<const double> s_grid) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("certificate: alpha must be >= 0");
  StabilityCertificate cert;
  cert.p = p;
  cert.alpha = alpha;
  cert.k = k_measured;
  cert.delta = delta;
  cert.constants = certificate_constants(p, alpha, k_measured, delta);
  cert.m_ref = m_ref;

  std::vector<std::vector<VerificationPoint>> rows(s_grid.size());
  parallel_for(s_grid.size(), [&](std::size_t i) {
    const double s = s_grid[i];
    const auto ms = m_ref.lookup(s);
    if (!ms.has_value()) {
      throw std::invalid_argument("certificate: M_ref does not cover s = " + std::to_string(s));
    }
    for (const double t : t_grid) {
      if (t < s) continue;
      const double norm = operator_norm(family, t, s).value;
      const double bound = cert.constants.n_tilde * *ms * std::exp(-cert.constants.rate * (t - s));
      rows[i].push_back({t, s, norm, bound});
    }
  });
  cert.margin = std::numeric_limits<double>::infinity();
  for (const auto& row : rows) {
    for (const auto& v : row) {
      cert.verification.push_back(v);
      const double rel = (v.bound - v.norm) / v.bound;
      if (v.norm > v.bound) ++cert.violations;
      if (rel < cert.margin) {
        cert.margin = rel;
        cert.worst_pair = {v.t, v.s};
      }
    }
  }
  if (cert.verification.empty()) throw std::invalid_argument("certificate: no pair with t >= s");
  cert.passed = cert.violations == 0 && cert.margin >= 0.0;
  return cert;
}

LyapunovW lyapunov_W(const EvolutionFamily& family, const SampledFunction& u, double p, double t,
                     const PhiConfig& cfg, const DatkoQuadConfig& quad) {
  const auto m = datko_integral(family, apply_phi_t({family, t}, u), p, t, cfg, quad);
  LyapunovW w;
  w.p = p;
  w.alpha = cfg.alpha;
  w.t = t;
  w.value = m.integral;
  w.tail_bound = m.tail_bound;
  w.certified = m.certified;
  w.converged = m.converged;
  return w;
}

AdditivityReport check_W_additivity(const EvolutionFamily& family, const SampledFunction& u, double p,
                                    double t0, double t, const PhiConfig& cfg,
                                    const DatkoQuadConfig& quad, double tolerance) {
  require_p(p);
  if (!(t >= t0)) throw std::invalid_argument("check_W_additivity: need t >= t0");
  AdditivityReport rep;
  rep.tolerance = tolerance;
  rep.w_t0 = lyapunov_W(family, u, p, t0, cfg, quad).value;
  rep.w_t = lyapunov_W(family, u, p, t, cfg, quad).value;
  const Eigen::VectorXd x0 = u(t0);
  if (t > t0 && vector_norm(family, x0) > 0.0) {
    // u = Phi(t0)u, so phi(xi, u) for xi >= t0 follows the trajectory from t0
    const PhiProfile profile(family, t0, x0, (t - t0) + cfg.horizon, cfg);
    rep.integral = simpson_richardson(
                       [&](double xi) { return std::pow(profile.at(xi).value, p); }, t0, t, quad.quad)
                       .value;
  }
  rep.residual = std::abs(rep.w_t + rep.integral - rep.w_t0);
  rep.scale = std::max({rep.w_t0, rep.w_t, rep.integral});
  rep.pass = rep.residual <= tolerance * rep.scale;
  return rep;
}

}  // namespace datko
