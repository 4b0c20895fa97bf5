#pragma once

#include <span>
#include <utility>
#include <vector>

#include "datko/family.hpp"
#include "datko/phi.hpp"
#include "datko/sampled_function.hpp"

namespace datko {

struct PhiTOperator {
  EvolutionFamily family;
  double cut_time = 0.0;
};

/// (Phi(t)u)(tau) = U(tau,t)u(t) for tau >= t, u(tau) before.
SampledFunction apply_phi_t(const PhiTOperator& op, const SampledFunction& u);

/// max over grid of phi_alpha(t, u): a lower estimate of the C_alpha norm,
/// valid for the stated window only.
struct CAlphaNorm {
  double alpha = 0.0;
  std::vector<double> grid;
  double value = 0.0;
  double arg_t = 0.0;
};

CAlphaNorm c_alpha_norm(const EvolutionFamily& family, const SampledFunction& u,
                        std::span<const double> grid, const PhiConfig& cfg);

/// Default evaluation grid: uniform on [0, t_norm] with the given step, plus extra points.
std::vector<double> norm_grid(double t_norm, double step, std::span<const double> extra = {});

struct ProjectionReport {
  double absorb_ts = 0.0;  // Phi(t)Phi(s)u vs Phi(s)u
  double absorb_st = 0.0;  // Phi(s)Phi(t)u vs Phi(s)u
  double idempotent = 0.0; // Phi(t)Phi(t)u vs Phi(t)u
  double max_residual = 0.0;
  std::pair<double, double> worst_pair{0.0, 0.0};
  double tolerance = 0.0;
  bool pass = true;
};

/// Pointwise residuals of the projection identities on a grid covering
/// [0, t + 5] for every pair (t, s), t >= s. Residuals are relative to the
/// larger of the compared values and ||u(s)||, ||u(t)||.
ProjectionReport check_projection_algebra(const EvolutionFamily& family, const SampledFunction& u,
                                          std::span<const std::pair<double, double>> pairs);

struct EqualityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double difference = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

/// phi(t, Phi(t)u) against phi(t, u).
EqualityReport check_phi_fixpoint(const EvolutionFamily& family, const SampledFunction& u, double t,
                                  const PhiConfig& cfg);

struct InequalityReport {
  double max_margin = -std::numeric_limits<double>::infinity();  // max of lhs - rhs
  double worst_excess = -std::numeric_limits<double>::infinity(); // max of lhs - rhs - slack
  std::vector<double> worst{};  // arguments of the worst case
  int cases = 0;
  int failures = 0;
  bool pass = true;
};

/// phi(t, Phi(s)u) <= e^{alpha(t-xi)} phi(xi, Phi(s)u) for each (t, xi),
/// t >= xi >= s. The right side is evaluated on a horizon longer by t - xi so
/// both truncated sups range over the same end time.
InequalityReport check_decay_lemma(const EvolutionFamily& family, const SampledFunction& u, double s,
                                   std::span<const std::pair<double, double>> pairs,
                                   const PhiConfig& cfg);

struct PhiTBoundReport {
  double lhs = 0.0;  // grid norm of Phi(t)u
  double rhs = 0.0;  // e^{-alpha t} times grid norm of u
  double slack = 0.0;
  bool pass = true;
};

/// Grid norm bound ||Phi(t)u||_alpha <= e^{-alpha t} ||u||_alpha, alpha < 0,
/// both norms on grid with t added.
PhiTBoundReport check_phi_t_bound(const EvolutionFamily& family, const SampledFunction& u, double t,
                                  std::span<const double> grid, const PhiConfig& cfg);

}  // namespace datko
