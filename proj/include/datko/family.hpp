#pragma once

#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "datko/expr.hpp"
#include "datko/norms.hpp"

namespace datko {

/// A time argument outside the domain a family can evaluate (t < s on a
/// non-reversible family, or outside a table's range).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {
class SegmentCache;
}

/// U(t,s) = exp(f(t) - f(s)) Id on R^n.
struct ScalarExpFamily {
  Expr generator;
  int dimension = 1;
};

struct MatrixODEOptions {
  double integrator_tol = 1e-10;
  double max_step = 0.1;
  /// Spacing of the anchor grid whose one-segment propagators are memoized.
  double cache_step = 0.5;
};

/// U(t,s)x solves x' = A(t)x from x(s) = x.
class MatrixODEFamily {
 public:
  MatrixODEFamily(std::vector<std::vector<Expr>> coefficients, MatrixODEOptions opts = {});

  int dimension() const { return dimension_; }
  const MatrixODEOptions& options() const { return opts_; }
  const std::vector<Expr>& coefficients() const { return coefficients_; }  // row-major

  Eigen::MatrixXd coefficient_matrix(double t) const;

  /// Direct adaptive integration of the matrix equation from s to t.
  Eigen::MatrixXd integrate(double t, double s) const;
  Eigen::VectorXd integrate(double t, double s, const Eigen::VectorXd& x) const;

  /// U((k+1)h, kh), memoized per step h. Thread-safe.
  const Eigen::MatrixXd& segment(double step, long long k) const;

 private:
  int dimension_;
  std::vector<Expr> coefficients_;
  MatrixODEOptions opts_;
  std::shared_ptr<detail::SegmentCache> cache_;
};

/// Propagator samples read from CSV.
///
/// Two layouts are accepted. If every row shares one s value the rows are
/// samples of a fundamental matrix Psi(t) = U(t, s0), interpolated linearly,
/// and U(t,s) = Psi(t) Psi(s)^{-1}; the family is reversible and the cocycle
/// identity holds to roundoff. Otherwise the rows must cover every pair
/// (t_i, s_j), i >= j, of a common node list; values are interpolated
/// piecewise linearly on the triangulated (t,s) grid and the cocycle identity
/// holds only to interpolation accuracy.
class TabulatedFamily {
 public:
  enum class Layout { kAnchored, kPairGrid };

  struct Row {
    double t;
    double s;
    Eigen::MatrixXd value;
  };

  explicit TabulatedFamily(std::vector<Row> rows);
  static TabulatedFamily from_csv(const std::string& path);

  int dimension() const { return dimension_; }
  Layout layout() const { return layout_; }
  double t_min() const { return nodes_.front(); }
  double t_max() const { return nodes_.back(); }

  Eigen::MatrixXd propagator(double t, double s) const;

 private:
  Eigen::MatrixXd fundamental(double t) const;
  const Eigen::MatrixXd& pair(std::size_t i, std::size_t j) const;
  std::size_t cell(double t) const;

  int dimension_ = 0;
  Layout layout_ = Layout::kAnchored;
  std::vector<double> nodes_;
  std::vector<Eigen::MatrixXd> values_;  // anchored: Psi(nodes_[i]); pair grid: lower triangle
};

class EvolutionFamily {
 public:
  using Backend = std::variant<ScalarExpFamily, MatrixODEFamily, TabulatedFamily>;

  explicit EvolutionFamily(Backend backend, NormKind norm = NormKind::kEuclidean);

  const Backend& backend() const { return backend_; }
  int dimension() const;
  bool reversible() const;
  NormKind norm() const { return norm_; }
  std::string_view kind() const;
  /// Latest time at which U can be evaluated.
  double valid_until() const;
  /// Residual level at which the cocycle identity is expected to hold.
  double cocycle_tolerance() const;
  /// The scalar generator f when the backend is ScalarExpFamily.
  const Expr* scalar_generator() const;

 private:
  Backend backend_;
  NormKind norm_;
};

EvolutionFamily scalar_exp_family(std::string_view generator, int dimension = 1,
                                  NormKind norm = NormKind::kEuclidean);
EvolutionFamily matrix_ode_family(const std::vector<std::vector<std::string>>& coefficients,
                                  MatrixODEOptions opts = {}, NormKind norm = NormKind::kEuclidean);

template <typename Derived>
double vector_norm(const EvolutionFamily& family, const Eigen::MatrixBase<Derived>& x) {
  return vector_norm(x, family.norm());
}

/// U(t,s)x. Requires t >= s unless the family is reversible; apply(t, t, x)
/// returns x unchanged.
Eigen::VectorXd apply(const EvolutionFamily& family, double t, double s, const Eigen::VectorXd& x);

/// The matrix of U(t,s).
Eigen::MatrixXd propagator(const EvolutionFamily& family, double t, double s);

/// ||U(t,s)|| in the operator norm induced by family.norm().
OperatorNormEstimate operator_norm(const EvolutionFamily& family, double t, double s,
                                   const PowerIterationOptions& opts = {});

/// Natural log of ||U(t,s)||, computed without forming exp(f(t) - f(s)) for
/// scalar families.
double log_operator_norm(const EvolutionFamily& family, double t, double s,
                         const PowerIterationOptions& opts = {});

struct TimeTriple {
  double t;
  double tau;
  double s;
};

struct CocycleReport {
  double max_residual = 0.0;  // relative to max(||x||, ||U(t,s)x||)
  TimeTriple worst{};
  double tolerance = 0.0;
  bool pass = true;
};

/// max over triples x probes of ||U(t,tau)U(tau,s)x - U(t,s)x||, relative to
/// the larger of ||x|| and ||U(t,s)x|| (growing families lose absolute digits).
CocycleReport check_cocycle(const EvolutionFamily& family, std::span<const TimeTriple> triples,
                            std::span<const Eigen::VectorXd> probes, double tolerance);
CocycleReport check_cocycle(const EvolutionFamily& family, std::span<const TimeTriple> triples,
                            std::span<const Eigen::VectorXd> probes);

/// The points {start} U {k*step : start < k*step <= end}. Grids anchored at a
/// common lattice let sweeps reuse memoized propagator segments.
std::vector<double> lattice_grid(double start, double end, double step);

/// U(tau_j, s)x along lattice_grid(s, end, step), stored as unit directions
/// and log growth factors log(||U(tau_j,s)x|| / ||x||).
struct VectorSweep {
  std::vector<double> times;
  std::vector<double> log_growth;
  Eigen::MatrixXd directions;  // column j has unit norm
};

VectorSweep sweep_vector(const EvolutionFamily& family, double s, const Eigen::VectorXd& x,
                         double end, double step);

/// log ||U(tau_j, s)|| along lattice_grid(s, end, step).
struct NormSweep {
  std::vector<double> times;
  std::vector<double> log_norm;
  int max_power_iterations = 0;
  bool converged = true;
};

NormSweep sweep_operator_norm(const EvolutionFamily& family, double s, double end, double step,
                              const PowerIterationOptions& opts = {});

}  // namespace datko
