#pragma once

// Typed task parameters shared by config validation and execution.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "datko/run.hpp"
#include "datko/sampled_function.hpp"

namespace datko::tasks {

struct FunctionSpec {
  std::vector<double> constant;          // used when components is empty
  std::vector<std::string> components;   // closed-form expressions in t

  SampledFunction build() const;
  int dimension() const;
};

struct PhiGrid {
  double horizon = 40.0;
  double tau_step = 0.01;
  int refine_depth = 3;
  double rel_tol = 1e-6;
};

struct QuadParams {
  double t_int = 40.0;
  double h0 = 0.05;
  double rtol = 1e-8;
  int max_levels = 10;
  double growth_tol = 1e-6;
};

struct Continuity {
  double t0 = 0.0;
  double t1 = 1.0;
  int steps = 64;
};

struct PhiTask {
  double alpha = 0.0;
  PhiGrid grid;
  FunctionSpec u;
  std::vector<double> t_grid;
  std::optional<double> tail_alpha_ref;
  std::vector<double> tail_s_grid;
  std::optional<Continuity> continuity;
};

struct SGrid {
  std::vector<double> s_grid;
  double horizon = 40.0;
  double growth_threshold = 2.0;
  double rel_tol = 1e-6;
  double t_step = 0.01;
  int refine_depth = 3;
};

struct AdmissibleTask {
  std::vector<double> alphas;
  std::optional<std::pair<double, double>> bracket;
  double tol_alpha = 0.01;
  SGrid window;
};

struct LyapunovTask {
  double t_max = 100.0;
  double grid_step = 0.01;
  bool inclusion = true;
  double inclusion_margin = 0.05;
  SGrid window;
};

struct Probe {
  double t;
  Eigen::VectorXd x;
};

struct DatkoTask {
  double p = 1.0;
  double alpha = -1.0;
  PhiGrid grid;
  QuadParams quad;
  std::vector<Probe> probes;   // explicit probes
  std::vector<double> probe_times;
  int random_probes = 8;
  double slack = 1e-6;
  std::optional<double> tail_alpha_ref;
  SGrid window;  // admissibility precondition for the necessity check
};

struct CertifyTask {
  double p = 1.0;
  double alpha = 0.0;
  double delta = 0.5;
  PhiGrid grid;
  QuadParams quad;
  std::vector<double> verify_grid;
  std::vector<double> probe_times;
  int random_probes = 8;
  double m_horizon = 40.0;
};

struct PropsTask {
  std::vector<std::string> suites;
  int cases = 20;
  double alpha = 0.0;
  double p = 1.0;
  double t_max = 20.0;
  PhiGrid grid;
  QuadParams quad;
  double t_norm = 50.0;
  double norm_step = 0.5;
};

using Params = std::variant<PhiTask, AdmissibleTask, LyapunovTask, DatkoTask, CertifyTask, PropsTask>;

struct Task {
  std::string name;
  std::string kind;
  Params params;
};

/// Parses and validates one task block; throws ConfigError.
Task parse_task(const Json& block, std::size_t index, int dimension);

const std::vector<std::string>& known_suites();

}  // namespace datko::tasks
