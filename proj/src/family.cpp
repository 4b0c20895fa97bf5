#include "datko/family.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <utility>

#include "datko/dormand_prince.hpp"

namespace datko {

std::string_view to_string(NormKind kind) {
  return kind == NormKind::kMax ? "max" : "euclidean";
}

std::string_view to_string(OperatorNormEstimate::Method method) {
  switch (method) {
    case OperatorNormEstimate::Method::kClosedFormScalar: return "closed_form_scalar";
    case OperatorNormEstimate::Method::kPowerIteration: return "power_iteration";
    case OperatorNormEstimate::Method::kMaxRowSum: return "max_row_sum";
  }
  return "unknown";
}

namespace detail {

// Memoized one-segment propagators U((k+1)h, kh). Entries live in a std::map,
// so references handed out stay valid while other threads insert.
class SegmentCache {
 public:
  template <typename Compute>
  const Eigen::MatrixXd& get(double step, long long k, Compute&& compute) {
    const Key key{std::bit_cast<std::uint64_t>(step), k};
    {
      std::shared_lock lock(mutex_);
      if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    }
    Eigen::MatrixXd value = compute();
    std::unique_lock lock(mutex_);
    return entries_.try_emplace(key, std::move(value)).first->second;
  }

 private:
  using Key = std::pair<std::uint64_t, long long>;
  std::shared_mutex mutex_;
  std::map<Key, Eigen::MatrixXd> entries_;
};

}  // namespace detail

namespace {

constexpr double kSnap = 1e-9;  // relative to the lattice step

// Index k with |s - k*step| <= kSnap*step, if any.
std::optional<long long> lattice_index(double s, double step) {
  const double q = s / step;
  const double k = std::round(q);
  if (std::abs(q - k) <= kSnap) return static_cast<long long>(k);
  return std::nullopt;
}

// First lattice index strictly after s (nodes within kSnap of s count as s).
long long next_lattice_index(double s, double step) {
  return static_cast<long long>(std::floor(s / step + kSnap)) + 1;
}

void require_nonnegative(double t, double s) {
  if (!(t >= 0.0) || !(s >= 0.0)) {
    throw DomainError("evolution family evaluated at negative time (t = " + std::to_string(t) +
                      ", s = " + std::to_string(s) + ")");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// MatrixODEFamily

MatrixODEFamily::MatrixODEFamily(std::vector<std::vector<Expr>> coefficients, MatrixODEOptions opts)
    : dimension_(static_cast<int>(coefficients.size())),
      opts_(opts),
      cache_(std::make_shared<detail::SegmentCache>()) {
  if (dimension_ == 0) throw std::invalid_argument("matrix_ode: coefficient matrix is empty");
  for (const auto& row : coefficients) {
    if (static_cast<int>(row.size()) != dimension_) {
      throw std::invalid_argument("matrix_ode: coefficient matrix must be square");
    }
    coefficients_.insert(coefficients_.end(), row.begin(), row.end());
  }
  if (!(opts_.integrator_tol > 0.0) || !(opts_.max_step > 0.0) || !(opts_.cache_step > 0.0)) {
    throw std::invalid_argument("matrix_ode: integrator_tol, max_step and cache_step must be positive");
  }
}

Eigen::MatrixXd MatrixODEFamily::coefficient_matrix(double t) const {
  Eigen::MatrixXd a(dimension_, dimension_);
  for (int i = 0; i < dimension_; ++i) {
    for (int j = 0; j < dimension_; ++j) a(i, j) = coefficients_[i * dimension_ + j](t);
  }
  return a;
}

Eigen::MatrixXd MatrixODEFamily::integrate(double t, double s) const {
  DormandPrinceOptions<double> o{opts_.integrator_tol, opts_.integrator_tol, opts_.max_step};
  auto rhs = [this](double tau, const Eigen::MatrixXd& y) -> Eigen::MatrixXd {
    return coefficient_matrix(tau) * y;
  };
  return integrate_dormand_prince<Eigen::MatrixXd>(
      rhs, s, Eigen::MatrixXd::Identity(dimension_, dimension_), t, o);
}

Eigen::VectorXd MatrixODEFamily::integrate(double t, double s, const Eigen::VectorXd& x) const {
  DormandPrinceOptions<double> o{opts_.integrator_tol, opts_.integrator_tol, opts_.max_step};
  auto rhs = [this](double tau, const Eigen::VectorXd& y) -> Eigen::VectorXd {
    return coefficient_matrix(tau) * y;
  };
  return integrate_dormand_prince<Eigen::VectorXd>(rhs, s, x, t, o);
}

const Eigen::MatrixXd& MatrixODEFamily::segment(double step, long long k) const {
  return cache_->get(step, k, [&] {
    const double a = static_cast<double>(k) * step;
    const double b = static_cast<double>(k + 1) * step;
    // segments are reused many times; integrate them well below the
    // family tolerance so composed chains stay within it
    DormandPrinceOptions<double> o{opts_.integrator_tol * 1e-2, opts_.integrator_tol * 1e-2,
                                   opts_.max_step};
    auto rhs = [this](double tau, const Eigen::MatrixXd& y) -> Eigen::MatrixXd {
      return coefficient_matrix(tau) * y;
    };
    return integrate_dormand_prince<Eigen::MatrixXd>(
        rhs, a, Eigen::MatrixXd::Identity(dimension_, dimension_), b, o);
  });
}

namespace {

// U(t,s) applied to the columns of y, t >= s, through the anchor lattice.
Eigen::MatrixXd ode_forward(const MatrixODEFamily& f, double t, double s, Eigen::MatrixXd y) {
  if (t == s) return y;
  const double h = f.options().cache_step;
  const long long first = lattice_index(s, h).value_or(next_lattice_index(s, h));
  const long long last = static_cast<long long>(std::floor(t / h + kSnap));
  if (last <= first) {
    return f.integrate(t, s) * y;
  }
  auto short_leg = [&](double to, double from, const Eigen::MatrixXd& v) -> Eigen::MatrixXd {
    if (std::abs(to - from) <= kSnap * h) return v;
    return f.integrate(to, from) * v;
  };
  y = short_leg(static_cast<double>(first) * h, s, y);
  for (long long k = first; k < last; ++k) y = f.segment(h, k) * y;
  return short_leg(t, static_cast<double>(last) * h, y);
}

Eigen::MatrixXd ode_propagator(const MatrixODEFamily& f, double t, double s) {
  const int n = f.dimension();
  if (t >= s) return ode_forward(f, t, s, Eigen::MatrixXd::Identity(n, n));
  return ode_forward(f, s, t, Eigen::MatrixXd::Identity(n, n)).inverse();
}

}  // namespace

// ---------------------------------------------------------------------------
// EvolutionFamily

EvolutionFamily::EvolutionFamily(Backend backend, NormKind norm)
    : backend_(std::move(backend)), norm_(norm) {
  if (dimension() < 1) throw std::invalid_argument("evolution family dimension must be >= 1");
}

int EvolutionFamily::dimension() const {
  return std::visit(
      [](const auto& b) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(b)>, ScalarExpFamily>) {
          return b.dimension;
        } else {
          return b.dimension();
        }
      },
      backend_);
}

bool EvolutionFamily::reversible() const {
  if (const auto* tab = std::get_if<TabulatedFamily>(&backend_)) {
    return tab->layout() == TabulatedFamily::Layout::kAnchored;
  }
  return true;
}

std::string_view EvolutionFamily::kind() const {
  switch (backend_.index()) {
    case 0: return "scalar_exp";
    case 1: return "matrix_ode";
    default: return "tabulated";
  }
}

double EvolutionFamily::valid_until() const {
  if (const auto* tab = std::get_if<TabulatedFamily>(&backend_)) return tab->t_max();
  return std::numeric_limits<double>::infinity();
}

double EvolutionFamily::cocycle_tolerance() const {
  if (const auto* ode = std::get_if<MatrixODEFamily>(&backend_)) {
    return 10.0 * ode->options().integrator_tol;
  }
  if (const auto* tab = std::get_if<TabulatedFamily>(&backend_)) {
    return tab->layout() == TabulatedFamily::Layout::kAnchored ? 1e-10 : 1e-2;
  }
  return 1e-12;
}

const Expr* EvolutionFamily::scalar_generator() const {
  if (const auto* sc = std::get_if<ScalarExpFamily>(&backend_)) return &sc->generator;
  return nullptr;
}

EvolutionFamily scalar_exp_family(std::string_view generator, int dimension, NormKind norm) {
  return EvolutionFamily(ScalarExpFamily{parse_generator(generator), dimension}, norm);
}

EvolutionFamily matrix_ode_family(const std::vector<std::vector<std::string>>& coefficients,
                                  MatrixODEOptions opts, NormKind norm) {
  std::vector<std::vector<Expr>> parsed;
  for (const auto& row : coefficients) {
    auto& out = parsed.emplace_back();
    for (const auto& src : row) out.push_back(parse_generator(src));
  }
  return EvolutionFamily(MatrixODEFamily(std::move(parsed), opts), norm);
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

void check_domain(const EvolutionFamily& family, double t, double s) {
  require_nonnegative(t, s);
  if (t < s && !family.reversible()) {
    throw DomainError("U(t,s) with t < s requested on a non-reversible " +
                      std::string(family.kind()) + " family");
  }
  const double until = family.valid_until();
  if (t > until || s > until) {
    throw DomainError("time " + std::to_string(std::max(t, s)) + " beyond family validity range " +
                      std::to_string(until));
  }
}

}  // namespace

Eigen::VectorXd apply(const EvolutionFamily& family, double t, double s, const Eigen::VectorXd& x) {
  if (x.size() != family.dimension()) {
    throw std::invalid_argument("apply: state dimension does not match the family");
  }
  check_domain(family, t, s);
  if (t == s) return x;
  return std::visit(
      [&](const auto& b) -> Eigen::VectorXd {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, ScalarExpFamily>) {
          return std::exp(b.generator(t) - b.generator(s)) * x;
        } else if constexpr (std::is_same_v<B, MatrixODEFamily>) {
          if (t > s) return ode_forward(b, t, s, x);
          return ode_propagator(b, t, s) * x;
        } else {
          return b.propagator(t, s) * x;
        }
      },
      family.backend());
}

Eigen::MatrixXd propagator(const EvolutionFamily& family, double t, double s) {
  check_domain(family, t, s);
  const int n = family.dimension();
  if (t == s) return Eigen::MatrixXd::Identity(n, n);
  return std::visit(
      [&](const auto& b) -> Eigen::MatrixXd {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, ScalarExpFamily>) {
          return std::exp(b.generator(t) - b.generator(s)) * Eigen::MatrixXd::Identity(n, n);
        } else if constexpr (std::is_same_v<B, MatrixODEFamily>) {
          return ode_propagator(b, t, s);
        } else {
          return b.propagator(t, s);
        }
      },
      family.backend());
}

OperatorNormEstimate operator_norm(const EvolutionFamily& family, double t, double s,
                                   const PowerIterationOptions& opts) {
  if (const Expr* f = family.scalar_generator()) {
    check_domain(family, t, s);
    OperatorNormEstimate est;
    est.method = OperatorNormEstimate::Method::kClosedFormScalar;
    est.value = t == s ? 1.0 : std::exp((*f)(t) - (*f)(s));
    return est;
  }
  return induced_norm(propagator(family, t, s), family.norm(), opts);
}

double log_operator_norm(const EvolutionFamily& family, double t, double s,
                         const PowerIterationOptions& opts) {
  if (const Expr* f = family.scalar_generator()) {
    check_domain(family, t, s);
    return t == s ? 0.0 : (*f)(t) - (*f)(s);
  }
  return std::log(operator_norm(family, t, s, opts).value);
}

CocycleReport check_cocycle(const EvolutionFamily& family, std::span<const TimeTriple> triples,
                            std::span<const Eigen::VectorXd> probes, double tolerance) {
  if (probes.empty()) throw std::invalid_argument("check_cocycle: empty probe set");
  CocycleReport report;
  report.tolerance = tolerance;
  for (const auto& tr : triples) {
    if (!(tr.t >= tr.tau && tr.tau >= tr.s && tr.s >= 0.0)) {
      throw std::invalid_argument("check_cocycle: triple must satisfy t >= tau >= s >= 0");
    }
    for (const auto& x : probes) {
      const double xn = vector_norm(family, x);
      if (xn == 0.0) continue;
      const Eigen::VectorXd composed = apply(family, tr.t, tr.tau, apply(family, tr.tau, tr.s, x));
      const Eigen::VectorXd direct = apply(family, tr.t, tr.s, x);
      const double r = vector_norm(family, composed - direct) / std::max(xn, vector_norm(family, direct));
      if (!(r <= report.max_residual)) {
        report.max_residual = r;
        report.worst = tr;
      }
    }
  }
  report.pass = report.max_residual <= tolerance;
  return report;
}

CocycleReport check_cocycle(const EvolutionFamily& family, std::span<const TimeTriple> triples,
                            std::span<const Eigen::VectorXd> probes) {
  return check_cocycle(family, triples, probes, family.cocycle_tolerance());
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<double> lattice_grid(double start, double end, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("lattice_grid: step must be positive");
  std::vector<double> grid{start};
  for (long long k = next_lattice_index(start, step);; ++k) {
    const double tau = static_cast<double>(k) * step;
    if (tau > end + kSnap * step) break;
    grid.push_back(tau);
  }
  return grid;
}

namespace {

void require_sweep_range(const EvolutionFamily& family, double s, double end) {
  require_nonnegative(end, s);
  if (end < s) throw std::invalid_argument("sweep: end precedes start");
  if (end > family.valid_until() + 1e-12) {
    throw DomainError("sweep to t = " + std::to_string(end) + " exceeds family validity range " +
                      std::to_string(family.valid_until()));
  }
}

// Propagates the columns of y along the lattice for a matrix ODE. visit(j, y)
// receives the state at grid point j; y is rescaled to unit max-abs entry
// after every step and the log of the scale handed over alongside.
template <typename Visit>
void ode_lattice_walk(const MatrixODEFamily& f, const std::vector<double>& grid, double step,
                      Eigen::MatrixXd y, Visit&& visit) {
  double log_scale = 0.0;
  auto renormalize = [&] {
    const double m = y.cwiseAbs().maxCoeff();
    if (!(m > 0.0) || !std::isfinite(m)) {
      throw IntegratorError("matrix_ode sweep produced a degenerate state");
    }
    y /= m;
    log_scale += std::log(m);
  };
  visit(std::size_t{0}, y, log_scale);
  const double s = grid.front();
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const long long k = static_cast<long long>(std::llround(grid[j] / step));
    if (j == 1 && !lattice_index(s, step).has_value()) {
      y = f.integrate(grid[1], s) * y;
    } else {
      y = f.segment(step, k - 1) * y;
    }
    renormalize();
    visit(j, y, log_scale);
  }
}

}  // namespace

VectorSweep sweep_vector(const EvolutionFamily& family, double s, const Eigen::VectorXd& x,
                         double end, double step) {
  require_sweep_range(family, s, end);
  const double xn = vector_norm(family, x);
  if (!(xn > 0.0)) throw std::invalid_argument("sweep_vector: zero initial state");
  VectorSweep out;
  out.times = lattice_grid(s, end, step);
  const std::size_t m = out.times.size();
  out.log_growth.resize(m);
  out.directions.resize(x.size(), static_cast<Eigen::Index>(m));

  std::visit(
      [&](const auto& b) {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, ScalarExpFamily>) {
          const double fs = b.generator(s);
          const Eigen::VectorXd dir = x / xn;
          out.log_growth[0] = 0.0;
          out.directions.col(0) = dir;
          for (std::size_t j = 1; j < m; ++j) {
            out.log_growth[j] = b.generator(out.times[j]) - fs;
            out.directions.col(static_cast<Eigen::Index>(j)) = dir;
          }
        } else if constexpr (std::is_same_v<B, MatrixODEFamily>) {
          ode_lattice_walk(b, out.times, step, x / xn,
                           [&](std::size_t j, const Eigen::MatrixXd& y, double log_scale) {
                             const double yn = vector_norm(family, y.col(0));
                             out.log_growth[j] = log_scale + std::log(yn);
                             out.directions.col(static_cast<Eigen::Index>(j)) = y.col(0) / yn;
                           });
          out.log_growth[0] = 0.0;
        } else {
          out.log_growth[0] = 0.0;
          out.directions.col(0) = x / xn;
          for (std::size_t j = 1; j < m; ++j) {
            const Eigen::VectorXd y = b.propagator(out.times[j], s) * (x / xn);
            const double yn = vector_norm(family, y);
            if (!(yn > 0.0) || !std::isfinite(yn)) {
              throw DomainError("tabulated propagator annihilated or overflowed the state");
            }
            out.log_growth[j] = std::log(yn);
            out.directions.col(static_cast<Eigen::Index>(j)) = y / yn;
          }
        }
      },
      family.backend());
  return out;
}

NormSweep sweep_operator_norm(const EvolutionFamily& family, double s, double end, double step,
                              const PowerIterationOptions& opts) {
  require_sweep_range(family, s, end);
  NormSweep out;
  out.times = lattice_grid(s, end, step);
  const std::size_t m = out.times.size();
  out.log_norm.assign(m, 0.0);
  Eigen::VectorXd warm;
  auto record = [&](std::size_t j, const Eigen::MatrixXd& g, double log_scale) {
    const OperatorNormEstimate est = induced_norm(g, family.norm(), opts, &warm);
    out.max_power_iterations = std::max(out.max_power_iterations, est.iterations);
    out.converged = out.converged && est.converged;
    out.log_norm[j] = log_scale + std::log(est.value);
  };

  std::visit(
      [&](const auto& b) {
        using B = std::decay_t<decltype(b)>;
        const int n = family.dimension();
        if constexpr (std::is_same_v<B, ScalarExpFamily>) {
          const double fs = b.generator(s);
          for (std::size_t j = 1; j < m; ++j) out.log_norm[j] = b.generator(out.times[j]) - fs;
        } else if constexpr (std::is_same_v<B, MatrixODEFamily>) {
          ode_lattice_walk(b, out.times, step, Eigen::MatrixXd::Identity(n, n), record);
        } else {
          for (std::size_t j = 0; j < m; ++j) record(j, b.propagator(out.times[j], s), 0.0);
        }
      },
      family.backend());
  out.log_norm[0] = 0.0;
  return out;
}

}  // namespace datko
