#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include <Eigen/Dense>

#include "datko/random.hpp"

namespace datko {

enum class NormKind { kEuclidean, kMax };

std::string_view to_string(NormKind kind);

template <typename Derived>
typename Derived::RealScalar vector_norm(const Eigen::MatrixBase<Derived>& x, NormKind kind) {
  if (kind == NormKind::kMax) return x.size() == 0 ? 0 : x.cwiseAbs().maxCoeff();
  return x.norm();
}

struct OperatorNormEstimate {
  enum class Method { kClosedFormScalar, kPowerIteration, kMaxRowSum };

  double value = 0.0;
  Method method = Method::kPowerIteration;
  int iterations = 0;
  /// Relative change of the Rayleigh quotient at the last iteration.
  double residual = 0.0;
  bool converged = true;
};

std::string_view to_string(OperatorNormEstimate::Method method);

struct PowerIterationOptions {
  double tol = 1e-12;
  int max_iters = 10000;
  std::uint64_t seed = 0x5eed;
};

/// Largest singular value of g by power iteration on g^T g.
///
/// If warm_start is non-null and non-zero it seeds the iteration, and on
/// return holds the converged right singular vector; this makes sweeps over
/// slowly varying matrices cost a few iterations per step.
template <typename Derived>
OperatorNormEstimate spectral_norm(const Eigen::MatrixBase<Derived>& g,
                                   const PowerIterationOptions& opts = {},
                                   Eigen::VectorXd* warm_start = nullptr) {
  OperatorNormEstimate est;
  est.method = OperatorNormEstimate::Method::kPowerIteration;
  const Eigen::Index n = g.cols();
  if (n == 0 || g.rows() == 0) return est;
  if (g.rows() == 1 && n == 1) {
    est.value = std::abs(static_cast<double>(g(0, 0)));
    return est;
  }

  if (g.squaredNorm() == 0.0) return est;

  Eigen::VectorXd v;
  if (warm_start != nullptr && warm_start->size() == n && warm_start->norm() > 0.0) {
    v = *warm_start / warm_start->norm();
  } else {
    CounterRng rng(opts.seed, static_cast<std::uint64_t>(n));
    v = rng.unit_vector(static_cast<int>(n));
  }

  const Eigen::MatrixXd gram = g.transpose() * g;
  double lambda = v.dot(gram * v);
  est.converged = false;
  for (int it = 1; it <= opts.max_iters; ++it) {
    Eigen::VectorXd w = gram * v;
    const double wn = w.norm();
    est.iterations = it;
    if (wn == 0.0) {
      // warm start in the null space of g; restart from a random direction
      CounterRng rng(opts.seed, static_cast<std::uint64_t>(n) + it);
      v = rng.unit_vector(static_cast<int>(n));
      lambda = v.dot(gram * v);
      continue;
    }
    v = w / wn;
    const double next = v.dot(gram * v);
    est.residual = std::abs(next - lambda) / next;
    lambda = next;
    if (est.residual <= opts.tol) {
      est.converged = true;
      break;
    }
  }
  est.value = (g * v).norm();
  if (warm_start != nullptr) *warm_start = v;
  return est;
}

/// Induced max-norm: largest absolute row sum. Exact.
template <typename Derived>
OperatorNormEstimate max_row_sum_norm(const Eigen::MatrixBase<Derived>& g) {
  OperatorNormEstimate est;
  est.method = OperatorNormEstimate::Method::kMaxRowSum;
  est.value = g.rows() == 0 ? 0.0 : g.cwiseAbs().rowwise().sum().maxCoeff();
  return est;
}

template <typename Derived>
OperatorNormEstimate induced_norm(const Eigen::MatrixBase<Derived>& g, NormKind kind,
                                  const PowerIterationOptions& opts = {},
                                  Eigen::VectorXd* warm_start = nullptr) {
  if (kind == NormKind::kMax) return max_row_sum_norm(g);
  return spectral_norm(g, opts, warm_start);
}

}  // namespace datko
