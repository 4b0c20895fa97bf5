#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "datko/expr.hpp"
#include "datko/family.hpp"

namespace datko {

/// A continuous function u : [0, domain_end] -> R^n.
///
/// Immutable value type; copies share their representation. Besides the
/// closed-form and sampled representations it can hold the output of the
/// cut-and-propagate operator (see apply_phi_t) and linear combinations, so
/// composed operators stay exact up to the family's own error.
class SampledFunction {
 public:
  static SampledFunction closed_form(std::vector<Expr> components,
                                     double domain_end = std::numeric_limits<double>::infinity());
  static SampledFunction constant(const Eigen::VectorXd& value,
                                  double domain_end = std::numeric_limits<double>::infinity());
  /// Piecewise-linear interpolation of (times[i], values[i]); times strictly increasing.
  static SampledFunction samples(std::vector<double> times, std::vector<Eigen::VectorXd> values);
  static SampledFunction callable(int dimension, std::function<Eigen::VectorXd(double)> fn,
                                  double domain_end = std::numeric_limits<double>::infinity());

  /// tau >= cut: U(tau, cut) base(cut); tau < cut: base(tau).
  static SampledFunction cut(const EvolutionFamily& family, double cut_time,
                             const SampledFunction& base);

  Eigen::VectorXd operator()(double t) const;

  int dimension() const;
  double domain_end() const;
  /// Cut time when this function was produced by cut().
  std::optional<double> cut_time() const;

  friend SampledFunction operator+(const SampledFunction& a, const SampledFunction& b);
  friend SampledFunction operator*(double c, const SampledFunction& u);

  struct Node;

 private:
  explicit SampledFunction(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

}  // namespace datko
