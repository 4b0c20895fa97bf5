#pragma once

#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "datko/bounding_function.hpp"
#include "datko/family.hpp"

namespace datko {

struct WindowOptions {
  double t_step = 0.01;    // lattice step of the t sweep
  int refine_depth = 3;    // local refinement levels around the grid max
  PowerIterationOptions power{};
};

/// Uniform grid {start, start+step, ...} up to end inclusive.
std::vector<double> uniform_grid(double start, double end, double step);

/// M_alpha(s) on s_grid: max over t in [s, s+horizon] of e^{-alpha(t-s)} ||U(t,s)||.
BoundingFunction bounding_function(const EvolutionFamily& family, double alpha,
                                   std::span<const double> s_grid, double horizon,
                                   const WindowOptions& opts = {});

enum class Verdict { kAdmissibleOnWindow, kGrowthDetected, kInconclusive };
std::string_view to_string(Verdict v);

struct AdmissibilityVerdict {
  double alpha = 0.0;
  Verdict verdict = Verdict::kInconclusive;
  double growth_ratio = 1.0;  // max over s of M^{(2T)}(s) / M^{(T)}(s)
  double worst_s = 0.0;
  double horizon = 0.0;       // T
  BoundingFunction m;         // M^{(T)}
};

struct VerdictOptions {
  double growth_threshold = 2.0;
  double rel_tol = 1e-6;
  WindowOptions window{};
};

AdmissibilityVerdict admissibility_verdict(const EvolutionFamily& family, double alpha,
                                           std::span<const double> s_grid, double horizon,
                                           const VerdictOptions& opts = {});

class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BoundarySearch {
  double boundary = 0.0;
  double lo = 0.0;  // last alpha judged on the growth side
  double hi = 0.0;  // last alpha judged admissible
  AdmissibilityVerdict lo_verdict;
  AdmissibilityVerdict hi_verdict;
  std::vector<AdmissibilityVerdict> steps;
  int inconclusive_steps = 0;
};

/// Bisection for the left end of the admissible set. Requires growth at
/// alpha_lo and admissibility at alpha_hi (throws BracketError otherwise).
/// Inconclusive midpoints count as the growth side.
BoundarySearch boundary_search(const EvolutionFamily& family, double alpha_lo, double alpha_hi,
                               double tol_alpha, std::span<const double> s_grid, double horizon,
                               const VerdictOptions& opts = {});

struct LyapunovEstimate {
  double k_l = 0.0;
  double t_min = 0.0;  // fit window
  double t_max = 0.0;
  double residual = 0.0;  // change against the window [3 t_max / 4, t_max]
  double arg_t = 0.0;
  bool overflow = false;  // log ||U(t,0)|| exceeded 700 somewhere
  double overflow_t = 0.0;
  std::vector<double> times;
  std::vector<double> log_norm;
};

/// K_L = max over grid t in [t_max/2, t_max] of log ||U(t,0)|| / t.
LyapunovEstimate lyapunov_exponent(const EvolutionFamily& family, double t_max, double grid_step,
                                   const PowerIterationOptions& power = {});

}  // namespace datko
