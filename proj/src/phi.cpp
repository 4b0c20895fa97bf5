#include "datko/phi.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace datko {

std::optional<double> BoundingFunction::lookup(double at) const {
  if (s.empty() || at < s.front() || at > s.back()) return std::nullopt;
  const auto it = std::lower_bound(s.begin(), s.end(), at);
  const auto i = static_cast<std::size_t>(it - s.begin());
  if (s[i] == at) return m[i];
  return std::max(m[i - 1], m[i]);
}

void PhiConfig::validate() const {
  if (!std::isfinite(alpha)) throw std::invalid_argument("phi: alpha must be finite");
  if (!(horizon > 0.0)) throw std::invalid_argument("phi: horizon must be positive");
  if (!(tau_step > 0.0) || tau_step > horizon) {
    throw std::invalid_argument("phi: tau_step must lie in (0, horizon]");
  }
  if (refine_depth < 0) throw std::invalid_argument("phi: refine_depth must be >= 0");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("phi: rel_tol must be positive");
  if (tail.has_value()) {
    if (!(tail->alpha_ref < alpha)) {
      throw std::invalid_argument("phi: tail reference exponent must be smaller than alpha");
    }
    if (tail->m_ref.s.empty() || tail->m_ref.s.size() != tail->m_ref.m.size()) {
      throw std::invalid_argument("phi: tail reference needs bounding samples");
    }
  }
}

// ---------------------------------------------------------------------------
// PhiProfile

PhiProfile::PhiProfile(const EvolutionFamily& family, double t0, const Eigen::VectorXd& x0,
                       double span, const PhiConfig& cfg)
    : family_(family), t0_(t0), span_(span), cfg_(cfg), x0_(x0) {
  cfg_.validate();
  if (!(span >= cfg.horizon)) throw std::invalid_argument("phi profile: span shorter than horizon");
  x0_norm_ = vector_norm(family_, x0_);
  if (!std::isfinite(x0_norm_)) throw std::invalid_argument("phi: non-finite state");
  if (x0_norm_ == 0.0) return;
  if (const Expr* f = family_.scalar_generator()) f0_ = (*f)(t0);

  sweep_ = sweep_vector(family_, t0, x0_, t0 + span, cfg.tau_step);
  const std::size_t n = sweep_.times.size();
  w_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    w_[j] = sweep_.log_growth[j] - cfg_.alpha * (sweep_.times[j] - t0_);
    if (!std::isfinite(w_[j])) {
      throw std::domain_error("phi: non-finite propagator value at tau = " +
                              std::to_string(sweep_.times[j]));
    }
  }

  table_.emplace_back(n);
  for (std::size_t j = 0; j < n; ++j) table_[0][j] = static_cast<std::uint32_t>(j);
  for (std::size_t len = 2; len <= n; len *= 2) {
    const auto& prev = table_.back();
    std::vector<std::uint32_t> row(n - len + 1);
    for (std::size_t j = 0; j + len <= n; ++j) {
      const auto a = prev[j];
      const auto b = prev[j + len / 2];
      row[j] = w_[b] > w_[a] ? b : a;
    }
    table_.push_back(std::move(row));
  }
}

std::size_t PhiProfile::range_argmax(std::size_t lo, std::size_t hi) const {
  const std::size_t len = hi - lo + 1;
  const int k = std::bit_width(len) - 1;
  const auto a = table_[k][lo];
  const auto b = table_[k][hi + 1 - (std::size_t{1} << k)];
  return w_[b] > w_[a] ? b : a;
}

double PhiProfile::log_growth(double tau) const {
  const auto& ts = sweep_.times;
  const auto it = std::upper_bound(ts.begin(), ts.end(), tau);
  const auto k = static_cast<std::size_t>(it - ts.begin()) - 1;  // ts[k] <= tau
  if (ts[k] == tau) return sweep_.log_growth[k];
  return std::visit(
      [&](const auto& b) -> double {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, ScalarExpFamily>) {
          return b.generator(tau) - f0_;
        } else if constexpr (std::is_same_v<B, MatrixODEFamily>) {
          // short leg from the last sweep node
          const Eigen::VectorXd d = sweep_.directions.col(static_cast<Eigen::Index>(k));
          return sweep_.log_growth[k] + std::log(vector_norm(family_, b.integrate(tau, ts[k], d)));
        } else {
          // cocycle is only approximate on pair grids; go back to t0 directly
          return std::log(vector_norm(family_, b.propagator(tau, t0_) * x0_) / x0_norm_);
        }
      },
      family_.backend());
}

PhiProfile::Best PhiProfile::refine(double lo, double hi, Best seed) const {
  constexpr int kParts = 10;
  Best best = seed;
  for (int level = 0; level < cfg_.refine_depth; ++level) {
    if (!(hi - lo > 1e-14 * std::max(1.0, std::abs(lo)))) break;
    int arg = -1;
    double arg_w = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kParts; ++i) {
      const double tau = i == kParts ? hi : lo + (hi - lo) * i / kParts;
      const double w = weight(tau);
      if (w > arg_w) {
        arg_w = w;
        arg = i;
      }
    }
    if (arg_w > best.w) best = {arg_w, lo + (hi - lo) * arg / kParts};
    const double width = (hi - lo) / kParts;
    const double center = lo + width * arg;
    const double new_lo = std::max(lo, center - width);
    hi = std::min(hi, center + width);
    lo = new_lo;
  }
  return best;
}

double PhiProfile::state_norm(double xi) const {
  if (x0_norm_ == 0.0) return 0.0;
  if (xi == t0_) return x0_norm_;
  return x0_norm_ * std::exp(log_growth(xi));
}

PhiValue PhiProfile::at(double xi) const {
  const double slack = 1e-9 * cfg_.tau_step;
  if (!(xi >= t0_ - slack) || xi > last() + slack) {
    throw std::domain_error("phi profile queried at " + std::to_string(xi) + " outside [" +
                            std::to_string(t0_) + ", " + std::to_string(last()) + "]");
  }
  xi = std::clamp(xi, t0_, last());
  PhiValue out;
  out.arg_tau = xi;
  if (x0_norm_ == 0.0) {
    if (cfg_.tail.has_value()) {
      out.tail_value = 0.0;
      out.certified = true;
    }
    return out;
  }

  const double hi = xi + cfg_.horizon;
  const auto& ts = sweep_.times;
  const double w_xi = weight(xi);
  Best best{w_xi, xi};
  // nodes strictly inside (xi, hi]; the end points are handled exactly
  const auto first = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), xi) - ts.begin());
  const auto past = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), hi) - ts.begin());
  std::optional<std::size_t> node;
  if (first < past) {
    const std::size_t j = range_argmax(first, past - 1);
    if (w_[j] > best.w) {
      best = {w_[j], ts[j]};
      node = j;
    }
  }
  if (past == 0 || ts[past - 1] != hi) {
    const double w_hi = weight(hi);
    if (w_hi > best.w) {
      best = {w_hi, hi};
      node.reset();
    }
  }

  if (cfg_.refine_depth > 0) {
    if (node.has_value()) {
      const std::size_t j = *node;
      const bool inner = j >= 1 && ts[j - 1] >= xi && j + 1 < ts.size() && ts[j + 1] <= hi;
      if (inner) {
        std::unique_lock lock(memo_mutex_);
        auto it = memo_.find(j);
        if (it == memo_.end()) {
          lock.unlock();
          const Best r = refine(ts[j - 1], ts[j + 1], best);
          lock.lock();
          it = memo_.emplace(j, r).first;
        }
        best = it->second;
      } else {
        const double lo = j >= 1 ? std::max(xi, ts[j - 1]) : ts[j];
        const double up = j + 1 < ts.size() ? std::min(hi, ts[j + 1]) : ts[j];
        best = refine(lo, up, best);
      }
    } else if (best.tau == xi) {
      const double up = first < ts.size() ? std::min(hi, ts[first]) : hi;
      best = refine(xi, up, best);
    } else {
      const double lo = past >= 1 ? std::max(xi, ts[past - 1]) : xi;
      best = refine(lo, hi, best);
    }
  }

  const double norm_xi = state_norm(xi);
  out.value = norm_xi * std::exp(std::max(0.0, best.w - w_xi));
  out.arg_tau = best.tau;
  if (!std::isfinite(out.value)) {
    throw std::domain_error("phi: value overflow at t = " + std::to_string(xi));
  }

  if (cfg_.tail.has_value()) {
    if (const auto m = cfg_.tail->m_ref.lookup(xi)) {
      const double tail = *m * std::exp((cfg_.tail->alpha_ref - cfg_.alpha) * cfg_.horizon) * norm_xi;
      out.tail_value = tail;
      if (tail > out.value) {
        out.value = tail;
        out.tail_dominates = true;
      } else {
        out.certified = tail <= cfg_.rel_tol * out.value;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

PhiValue phi(const EvolutionFamily& family, const SampledFunction& u, double t, const PhiConfig& cfg) {
  if (!(t >= 0.0)) throw std::invalid_argument("phi: t must be >= 0");
  return state_norm_t(family, u(t), t, cfg);
}

PhiValue state_norm_t(const EvolutionFamily& family, const Eigen::VectorXd& x, double t,
                      const PhiConfig& cfg) {
  if (x.size() != family.dimension()) throw std::invalid_argument("phi: dimension mismatch");
  if (t + cfg.horizon > family.valid_until()) {
    throw DomainError("phi: t + horizon = " + std::to_string(t + cfg.horizon) +
                      " exceeds the family validity range");
  }
  return PhiProfile(family, t, x, cfg.horizon, cfg).at(t);
}

ContinuityReport continuity_probe(const EvolutionFamily& family, const SampledFunction& u,
                                  const PhiConfig& cfg, double t0, double t1, int steps) {
  if (!(t0 >= 0.0) || !(t1 > t0)) throw std::invalid_argument("continuity_probe: need 0 <= t0 < t1");
  if (steps < 2) throw std::invalid_argument("continuity_probe: steps must be >= 2");
  ContinuityReport rep;
  const int fine = 2 * steps;
  rep.times.resize(fine + 1);
  rep.values.resize(fine + 1);
  for (int i = 0; i <= fine; ++i) {
    rep.times[i] = i == fine ? t1 : t0 + (t1 - t0) * i / fine;
    rep.values[i] = phi(family, u, rep.times[i], cfg).value;
  }
  for (int i = 0; i < fine; ++i) {
    rep.delta_half = std::max(rep.delta_half, std::abs(rep.values[i + 1] - rep.values[i]));
  }
  for (int i = 0; i < fine; i += 2) {
    rep.delta_h = std::max(rep.delta_h, std::abs(rep.values[i + 2] - rep.values[i]));
  }
  rep.ratio = rep.delta_h > 0.0 ? rep.delta_half / rep.delta_h : 0.0;
  rep.pass = rep.delta_h == 0.0 || rep.ratio <= rep.threshold;
  return rep;
}

}  // namespace datko
