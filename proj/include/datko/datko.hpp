#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "datko/bounding_function.hpp"
#include "datko/family.hpp"
#include "datko/phi.hpp"
#include "datko/quadrature.hpp"
#include "datko/sampled_function.hpp"

namespace datko {

struct DatkoQuadConfig {
  double t_int = 40.0;  // integration window [t, t + t_int]
  QuadratureOptions quad{};
  /// Boundedness test: the increment over [t + t_int, t + 2 t_int] must stay
  /// below growth_tol times the integral.
  double growth_tol = 1e-6;
};

struct DatkoMeasurement {
  double p = 1.0;
  double alpha = 0.0;
  double t = 0.0;
  double integral = 0.0;
  double phi_at_t = 0.0;
  std::optional<double> ratio_k;  // integral / phi_at_t^p
  double t_int = 0.0;
  std::optional<double> tail_bound;
  bool certified = false;
  bool converged = true;
  double last_estimate = 0.0;
  double previous_estimate = 0.0;
  std::optional<double> increment;  // set when boundedness was tested
  bool bounded = true;
};

/// Integral of phi_alpha^p(xi, u) over [t, t + t_int] for u in the range of
/// Phi(t); only u(t) enters. With check_bounded the window is doubled and the
/// second half reported as `increment`.
DatkoMeasurement datko_integral(const EvolutionFamily& family, const SampledFunction& u, double p,
                                double t, const PhiConfig& cfg, const DatkoQuadConfig& quad,
                                bool check_bounded = false);

struct NecessityReport {
  double p = 1.0;
  double alpha = 0.0;
  double bound = 0.0;  // 1 / (-p alpha)
  double max_ratio = 0.0;
  double slack = 1e-6;
  double worst_t = 0.0;
  Eigen::VectorXd worst_x;
  int probes = 0;
  bool pass = true;
  std::vector<DatkoMeasurement> measurements;
};

/// ratio_K <= 1/(-p alpha) + slack for u = Phi(t)(x constant) at each probe.
NecessityReport necessity_check(const EvolutionFamily& family, double p,
                                std::span<const std::pair<double, Eigen::VectorXd>> probes,
                                const PhiConfig& cfg, const DatkoQuadConfig& quad, double slack = 1e-6);

struct ProbeSuite {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> directions;  // unit vectors
};

/// Canonical basis plus `random_count` seeded random unit vectors, at
/// `time_count` uniform times in [0, t_end].
ProbeSuite default_probe_suite(int dimension, double t_end, std::uint64_t seed, int time_count = 16,
                               int random_count = 8);

struct DatkoConstant {
  double k = 0.0;
  bool bounded = true;
  double worst_t = 0.0;
  Eigen::VectorXd worst_x;
  int probes = 0;
  double max_increment_ratio = 0.0;
  std::vector<DatkoMeasurement> measurements;
};

/// Max ratio_K over u_x = Phi(t)(x / M(t)) for the probe suite, with the
/// boundedness test on every probe. m supplies M(t) at the probe times.
DatkoConstant measure_datko_constant(const EvolutionFamily& family, double p, const ProbeSuite& suite,
                                     const BoundingFunction& m, const PhiConfig& cfg,
                                     const DatkoQuadConfig& quad);

struct CertificateConstants {
  double n = 0.0;
  double rate = 0.0;
  double n_tilde = 0.0;
};

/// N = max{e^{p alpha} K, e^{p alpha}}, rate = delta/(p N), N~ = (N/(1-delta))^{1/p}.
CertificateConstants certificate_constants(double p, double alpha, double k, double delta);

struct VerificationPoint {
  double t;
  double s;
  double norm;
  double bound;
};

struct StabilityCertificate {
  double p = 1.0;
  double alpha = 0.0;
  double k = 0.0;
  double delta = 0.5;
  CertificateConstants constants;
  BoundingFunction m_ref;
  std::vector<VerificationPoint> verification;
  std::pair<double, double> worst_pair{0.0, 0.0};
  double margin = 0.0;  // min over pairs of (bound - norm) / bound
  int violations = 0;
  bool passed = false;
};

/// Builds the constants and checks ||U(t,s)|| <= N~ M(s) e^{-rate (t-s)} at
/// every pair t >= s of t_grid x s_grid. m_ref must cover every s in s_grid.
StabilityCertificate build_certificate(const EvolutionFamily& family, double p, double k_measured,
                                       double alpha, double delta, const BoundingFunction& m_ref,
                                       std::span<const double> t_grid, std::span<const double> s_grid);

struct LyapunovW {
  double p = 1.0;
  double alpha = 0.0;
  double t = 0.0;
  double value = 0.0;
  std::optional<double> tail_bound;
  bool certified = false;
  bool converged = true;
};

/// W(t,u) = integral over [t, inf) of phi_alpha^p(xi, Phi(t)u), truncated at t + t_int.
LyapunovW lyapunov_W(const EvolutionFamily& family, const SampledFunction& u, double p, double t,
                     const PhiConfig& cfg, const DatkoQuadConfig& quad);

struct AdditivityReport {
  double w_t0 = 0.0;
  double w_t = 0.0;
  double integral = 0.0;  // over [t0, t]
  double residual = 0.0;
  double scale = 0.0;
  double tolerance = 1e-6;
  bool pass = true;
};

/// W(t,u) + integral_{t0}^{t} phi^p(xi,u) = W(t0,u) for u in the range of Phi(t0).
AdditivityReport check_W_additivity(const EvolutionFamily& family, const SampledFunction& u, double p,
                                    double t0, double t, const PhiConfig& cfg,
                                    const DatkoQuadConfig& quad, double tolerance = 1e-6);

}  // namespace datko
