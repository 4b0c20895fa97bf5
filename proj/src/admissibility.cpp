#include "datko/admissibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace datko {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kAdmissibleOnWindow: return "admissible_on_window";
    case Verdict::kGrowthDetected: return "growth_detected";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

std::vector<double> uniform_grid(double start, double end, double step) {
  if (!(step > 0.0) || !(end >= start)) throw std::invalid_argument("uniform_grid: bad range");
  std::vector<double> g;
  for (long long k = 0;; ++k) {
    const double v = start + static_cast<double>(k) * step;
    if (v > end + 1e-9 * step) break;
    g.push_back(v);
  }
  return g;
}

namespace {

// log max over t in [s, s+h] of e^{-alpha(t-s)} ||U(t,s)||, for each h in
// `horizons` (ascending), from one sweep.
std::vector<double> log_window_max(const EvolutionFamily& family, double alpha, double s,
                                   std::span<const double> horizons, const WindowOptions& opts) {
  const NormSweep sw = sweep_operator_norm(family, s, s + horizons.back(), opts.t_step, opts.power);
  if (!sw.converged) {
    throw std::runtime_error("power iteration did not converge in the sweep from s = " +
                             std::to_string(s));
  }
  const auto& ts = sw.times;
  auto weight = [&](double t) {
    return log_operator_norm(family, t, s, opts.power) - alpha * (t - s);
  };
  std::vector<double> w(ts.size());
  for (std::size_t j = 0; j < ts.size(); ++j) w[j] = sw.log_norm[j] - alpha * (ts[j] - s);

  std::vector<double> out;
  std::size_t j = 0;
  std::size_t arg = 0;
  const double snap = 1e-9 * opts.t_step;
  for (const double h : horizons) {
    const double end = s + h;
    for (; j < ts.size() && ts[j] <= end + snap; ++j) {
      if (w[j] > w[arg]) arg = j;
    }
    double best = w[arg];
    double lo = arg >= 1 ? ts[arg - 1] : ts[arg];
    double hi = arg + 1 < ts.size() ? std::min(ts[arg + 1], end) : ts[arg];
    if (ts[j - 1] < end - snap) {
      const double w_end = weight(end);
      if (w_end > best) {
        best = w_end;
        lo = ts[j - 1];
        hi = end;
      }
    }
    // ten-way subdivision of the bracket, refine_depth times
    for (int level = 0; level < opts.refine_depth && hi - lo > 1e-14 * std::max(1.0, lo); ++level) {
      double level_best = -std::numeric_limits<double>::infinity();
      int level_arg = 0;
      for (int i = 0; i <= 10; ++i) {
        const double v = weight(i == 10 ? hi : lo + (hi - lo) * i / 10.0);
        if (v > level_best) {
          level_best = v;
          level_arg = i;
        }
      }
      best = std::max(best, level_best);
      const double width = (hi - lo) / 10.0;
      const double c = lo + width * level_arg;
      const double new_lo = std::max(lo, c - width);
      hi = std::min(hi, c + width);
      lo = new_lo;
    }
    out.push_back(std::max(0.0, best));
  }
  return out;
}

}  // namespace

BoundingFunction bounding_function(const EvolutionFamily& family, double alpha,
                                   std::span<const double> s_grid, double horizon,
                                   const WindowOptions& opts) {
  if (!(horizon > 0.0)) throw std::invalid_argument("bounding_function: horizon must be positive");
  BoundingFunction bf;
  bf.alpha = alpha;
  bf.horizon = horizon;
  const double h[] = {horizon};
  for (const double s : s_grid) {
    if (!bf.s.empty() && !(s > bf.s.back())) {
      throw std::invalid_argument("bounding_function: s grid must increase");
    }
    bf.s.push_back(s);
    bf.m.push_back(std::exp(log_window_max(family, alpha, s, h, opts)[0]));
  }
  return bf;
}

AdmissibilityVerdict admissibility_verdict(const EvolutionFamily& family, double alpha,
                                           std::span<const double> s_grid, double horizon,
                                           const VerdictOptions& opts) {
  if (!(horizon > 0.0)) throw std::invalid_argument("admissibility_verdict: horizon must be positive");
  if (s_grid.empty()) throw std::invalid_argument("admissibility_verdict: empty s grid");
  AdmissibilityVerdict v;
  v.alpha = alpha;
  v.horizon = horizon;
  v.m.alpha = alpha;
  v.m.horizon = horizon;
  v.growth_ratio = 0.0;
  const double h[] = {horizon, 2.0 * horizon};
  for (const double s : s_grid) {
    const auto lm = log_window_max(family, alpha, s, h, opts.window);
    v.m.s.push_back(s);
    v.m.m.push_back(std::exp(lm[0]));
    const double ratio = std::exp(lm[1] - lm[0]);
    if (ratio > v.growth_ratio) {
      v.growth_ratio = ratio;
      v.worst_s = s;
    }
  }
  if (v.growth_ratio > opts.growth_threshold) {
    v.verdict = Verdict::kGrowthDetected;
  } else if (v.growth_ratio <= 1.0 + opts.rel_tol) {
    v.verdict = Verdict::kAdmissibleOnWindow;
  } else {
    v.verdict = Verdict::kInconclusive;
  }
  return v;
}

BoundarySearch boundary_search(const EvolutionFamily& family, double alpha_lo, double alpha_hi,
                               double tol_alpha, std::span<const double> s_grid, double horizon,
                               const VerdictOptions& opts) {
  if (!(alpha_lo < alpha_hi)) throw std::invalid_argument("boundary_search: need alpha_lo < alpha_hi");
  if (!(tol_alpha > 0.0)) throw std::invalid_argument("boundary_search: tol_alpha must be positive");
  BoundarySearch out;
  out.lo_verdict = admissibility_verdict(family, alpha_lo, s_grid, horizon, opts);
  out.hi_verdict = admissibility_verdict(family, alpha_hi, s_grid, horizon, opts);
  if (out.lo_verdict.verdict != Verdict::kGrowthDetected) {
    throw BracketError("boundary_search: alpha_lo = " + std::to_string(alpha_lo) + " gives " +
                       std::string(to_string(out.lo_verdict.verdict)) + ", not growth_detected");
  }
  if (out.hi_verdict.verdict != Verdict::kAdmissibleOnWindow) {
    throw BracketError("boundary_search: alpha_hi = " + std::to_string(alpha_hi) + " gives " +
                       std::string(to_string(out.hi_verdict.verdict)) + ", not admissible_on_window");
  }
  double lo = alpha_lo;
  double hi = alpha_hi;
  while (hi - lo > tol_alpha) {
    const double mid = 0.5 * (lo + hi);
    auto v = admissibility_verdict(family, mid, s_grid, horizon, opts);
    if (v.verdict == Verdict::kAdmissibleOnWindow) {
      hi = mid;
      out.hi_verdict = v;
    } else {
      if (v.verdict == Verdict::kInconclusive) ++out.inconclusive_steps;
      lo = mid;
      out.lo_verdict = v;
    }
    v.m = {};  // keep the step log small
    out.steps.push_back(std::move(v));
  }
  out.lo = lo;
  out.hi = hi;
  out.boundary = 0.5 * (lo + hi);
  return out;
}

LyapunovEstimate lyapunov_exponent(const EvolutionFamily& family, double t_max, double grid_step,
                                   const PowerIterationOptions& power) {
  if (!(grid_step > 0.0) || !(t_max >= 10.0 * grid_step)) {
    throw std::invalid_argument("lyapunov_exponent: need t_max >= 10 grid_step > 0");
  }
  const NormSweep sw = sweep_operator_norm(family, 0.0, t_max, grid_step, power);
  LyapunovEstimate est;
  est.t_min = 0.5 * t_max;
  est.t_max = t_max;
  est.times = sw.times;
  est.log_norm = sw.log_norm;
  for (std::size_t j = 0; j < sw.times.size(); ++j) {
    if (sw.log_norm[j] > 700.0 && !est.overflow) {
      est.overflow = true;
      est.overflow_t = sw.times[j];
    }
  }
  auto window_max = [&](double from, double* arg) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < sw.times.size(); ++j) {
      const double t = sw.times[j];
      if (t < from - 1e-9 * grid_step || t <= 0.0) continue;
      const double v = sw.log_norm[j] / t;
      if (v > best) {
        best = v;
        if (arg != nullptr) *arg = t;
      }
    }
    return best;
  };
  est.k_l = window_max(0.5 * t_max, &est.arg_t);
  est.residual = std::abs(est.k_l - window_max(0.75 * t_max, nullptr));
  return est;
}

}  // namespace datko
