#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "datko/bounding_function.hpp"
#include "datko/family.hpp"
#include "datko/sampled_function.hpp"

namespace datko {

/// A reference exponent alpha_ref < alpha with known bounding samples; bounds
/// the part of the sup beyond the horizon by M_ref(t) e^{(alpha_ref-alpha)T} ||u(t)||.
struct TailBound {
  double alpha_ref = 0.0;
  BoundingFunction m_ref;
};

struct PhiConfig {
  double alpha = 0.0;
  double horizon = 40.0;
  double tau_step = 0.01;
  int refine_depth = 3;
  std::optional<TailBound> tail;
  double rel_tol = 1e-6;

  /// Throws std::invalid_argument on inconsistent parameters.
  void validate() const;
};

struct PhiValue {
  double value = 0.0;
  double arg_tau = 0.0;
  std::optional<double> tail_value;
  bool tail_dominates = false;
  bool certified = false;
};

/// The weighted sup along one trajectory tau -> U(tau, t0) x0.
///
/// One sweep from t0 to t0 + span serves every query xi in [t0, t0 + span - T]:
/// the weights log ||U(tau,t0)x0|| - alpha (tau - t0) go into a sparse table,
/// a query takes the range argmax over [xi, xi + T], adds both window ends
/// exactly and refines around the winner. For xi >= t0 the result is
/// phi_alpha(xi, u) for any u with u(xi) = U(xi, t0) x0, e.g. u in the range
/// of Phi(t0).
class PhiProfile {
 public:
  PhiProfile(const EvolutionFamily& family, double t0, const Eigen::VectorXd& x0, double span,
             const PhiConfig& cfg);

  PhiValue at(double xi) const;
  /// ||U(xi, t0) x0||.
  double state_norm(double xi) const;

  double first() const { return t0_; }
  double last() const { return t0_ + (span_ - cfg_.horizon); }

 private:
  struct Best {
    double w;
    double tau;
  };

  double log_growth(double tau) const;  // log(||U(tau,t0)x0|| / ||x0||)
  double weight(double tau) const { return log_growth(tau) - cfg_.alpha * (tau - t0_); }
  std::size_t range_argmax(std::size_t lo, std::size_t hi) const;
  Best refine(double lo, double hi, Best seed) const;

  EvolutionFamily family_;
  double t0_;
  double span_;
  PhiConfig cfg_;
  Eigen::VectorXd x0_;
  double x0_norm_;
  double f0_ = 0.0;  // generator at t0, scalar families
  VectorSweep sweep_;
  std::vector<double> w_;
  std::vector<std::vector<std::uint32_t>> table_;

  mutable std::mutex memo_mutex_;
  mutable std::unordered_map<std::size_t, Best> memo_;
};

/// phi_alpha(t,u) = sup over tau >= t of e^{-alpha(tau-t)} ||U(tau,t) u(t)||,
/// truncated at t + cfg.horizon.
PhiValue phi(const EvolutionFamily& family, const SampledFunction& u, double t, const PhiConfig& cfg);

/// ||x||_t, i.e. phi with u constant equal to x.
PhiValue state_norm_t(const EvolutionFamily& family, const Eigen::VectorXd& x, double t,
                      const PhiConfig& cfg);

struct ContinuityReport {
  double delta_h = 0.0;       // max adjacent difference on the coarse grid
  double delta_half = 0.0;    // same on the grid of half the step
  double ratio = 0.0;         // delta_half / delta_h (0 when delta_h = 0)
  double threshold = 0.75;
  bool pass = true;
  std::vector<double> times;  // fine grid
  std::vector<double> values;
};

/// Modulus-of-continuity probe for t -> phi_alpha(t,u) on [t0, t1] with
/// `steps` and 2*steps intervals. The pass threshold is a heuristic.
ContinuityReport continuity_probe(const EvolutionFamily& family, const SampledFunction& u,
                                  const PhiConfig& cfg, double t0, double t1, int steps);

}  // namespace datko
