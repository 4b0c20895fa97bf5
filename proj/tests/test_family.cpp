#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "datko/family.hpp"
#include "datko/random.hpp"
#include "oracles.hpp"

using namespace datko;

namespace {

std::filesystem::path write_csv(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

Eigen::MatrixXd rotation_decay(double t) {
  Eigen::Matrix2d r;
  r << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
  return std::exp(-0.5 * t) * r;
}

}  // namespace

TEST(ScalarFamily, ClosedForm) {
  const auto fam = scalar_exp_family("-2*t + t*sin(t)^2", 2);
  const Eigen::Vector2d x(3.0, -4.0);
  for (auto [t, s] : std::vector<std::pair<double, double>>{{0, 0}, {1, 0}, {7.3, 2.1}, {2, 5}}) {
    const Eigen::VectorXd y = apply(fam, t, s, x);
    const double g = std::exp(oracle::example_f(t) - oracle::example_f(s));
    EXPECT_NEAR(y(0), 3 * g, 1e-13 * g * 3);
    EXPECT_NEAR(operator_norm(fam, t, s).value, g, 1e-13 * g);
    EXPECT_NEAR(log_operator_norm(fam, t, s), oracle::example_f(t) - oracle::example_f(s), 1e-12);
  }
  EXPECT_TRUE(fam.reversible());
  EXPECT_EQ(fam.kind(), "scalar_exp");
}

TEST(ScalarFamily, LogNormAvoidsOverflow) {
  const auto fam = scalar_exp_family("10*t");
  EXPECT_NEAR(log_operator_norm(fam, 100.0, 0.0), 1000.0, 1e-9);
}

TEST(MatrixODE, DiagonalMatchesExponential) {
  const auto fam = matrix_ode_family({{"-1", "0"}, {"0", "-3"}});
  const Eigen::Vector2d d(-1, -3);
  for (auto [t, s] : std::vector<std::pair<double, double>>{{1, 0}, {3.7, 1.2}, {10, 9.99}}) {
    const Eigen::MatrixXd u = propagator(fam, t, s);
    EXPECT_LT((u - oracle::diag_exp(d, t - s)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(MatrixODE, NonCommutingAgainstRK4) {
  const auto fam = matrix_ode_family({{"-1", "t"}, {"-0.5*sin(t)", "-2"}});
  const oracle::MatFn a = [](double t) {
    Eigen::Matrix2d m;
    m << -1, t, -0.5 * std::sin(t), -2;
    return Eigen::MatrixXd(m);
  };
  for (auto [t, s] : std::vector<std::pair<double, double>>{{2, 0}, {4.3, 1.7}, {0.25, 0.2}}) {
    const Eigen::MatrixXd ref = oracle::rk4_propagator(a, t, s, 20000);
    const Eigen::MatrixXd got = propagator(fam, t, s);
    EXPECT_LT((got - ref).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, ref.norm())) << t << " " << s;
    const Eigen::Vector2d x(0.3, -1.1);
    EXPECT_LT((apply(fam, t, s, x) - ref * x).norm(), 1e-8 * std::max(1.0, ref.norm()));
    EXPECT_NEAR(operator_norm(fam, t, s).value, oracle::svd_norm(ref), 1e-8 * oracle::svd_norm(ref));
  }
}

TEST(MatrixODE, BackwardIsInverse) {
  const auto fam = matrix_ode_family({{"-1", "t"}, {"0", "-2"}});
  const Eigen::Vector2d x(1, 2);
  const Eigen::VectorXd y = apply(fam, 5.0, 2.0, x);
  EXPECT_LT((apply(fam, 2.0, 5.0, y) - x).norm(), 1e-8);
}

TEST(MatrixODE, IdentityAtEqualTimes) {
  const auto fam = matrix_ode_family({{"-1", "t"}, {"0", "-2"}});
  const Eigen::Vector2d x(1, 2);
  EXPECT_EQ(apply(fam, 3.3, 3.3, x), Eigen::VectorXd(x));
}

TEST(OperatorNorm, MatchesSvdAndRowSum) {
  CounterRng rng(7);
  for (int k = 0; k < 20; ++k) {
    Eigen::MatrixXd m(4, 4);
    for (int i = 0; i < 16; ++i) m(i / 4, i % 4) = rng.normal();
    const auto est = spectral_norm(m);
    EXPECT_TRUE(est.converged);
    EXPECT_NEAR(est.value, oracle::svd_norm(m), 1e-9 * oracle::svd_norm(m));
    EXPECT_DOUBLE_EQ(induced_norm(m, NormKind::kMax).value, m.cwiseAbs().rowwise().sum().maxCoeff());
  }
}

TEST(OperatorNorm, ZeroAndRankOne) {
  EXPECT_EQ(spectral_norm(Eigen::MatrixXd::Zero(3, 3)).value, 0.0);
  const Eigen::Vector3d a(1, 2, 2), b(0, 3, 4);
  EXPECT_NEAR(spectral_norm(Eigen::MatrixXd(a * b.transpose())).value, 15.0, 1e-12);
}

TEST(Cocycle, HoldsForEachBackend) {
  const std::vector<TimeTriple> triples = {{5, 3, 1}, {2, 2, 0}, {9.5, 0.5, 0.25}};
  const std::vector<Eigen::VectorXd> probes = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0.6, -0.8)};
  for (const auto& fam : {scalar_exp_family("-t + sin(t)", 2), matrix_ode_family({{"-1", "t"}, {"0", "-2"}})}) {
    const auto rep = check_cocycle(fam, triples, probes);
    EXPECT_TRUE(rep.pass) << fam.kind() << " " << rep.max_residual;
  }
}

TEST(Tabulated, AnchoredLayoutReproducesNodes) {
  std::string csv = "t,s,a11,a12,a21,a22\n";
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.1 * i;
    const Eigen::MatrixXd p = rotation_decay(t);
    char line[256];
    std::snprintf(line, sizeof line, "%.17g,0,%.17g,%.17g,%.17g,%.17g\n", t, p(0, 0), p(0, 1), p(1, 0), p(1, 1));
    csv += line;
  }
  const auto fam = EvolutionFamily(TabulatedFamily::from_csv(write_csv("anch.csv", csv).string()));
  EXPECT_TRUE(fam.reversible());
  EXPECT_DOUBLE_EQ(fam.valid_until(), 10.0);
  const Eigen::MatrixXd u = propagator(fam, 0.1 * 70, 0.1 * 20);
  const Eigen::MatrixXd ref = rotation_decay(0.1 * 70) * rotation_decay(0.1 * 20).inverse();
  EXPECT_LT((u - ref).cwiseAbs().maxCoeff(), 1e-12);
  const std::vector<TimeTriple> triples = {{9.93, 4.41, 0.07}};
  const std::vector<Eigen::VectorXd> probes = {Eigen::Vector2d(1, 1)};
  EXPECT_TRUE(check_cocycle(fam, triples, probes).pass);
  EXPECT_THROW(apply(fam, 10.5, 0.0, Eigen::Vector2d(1, 0)), DomainError);
}

TEST(Tabulated, PairGridLayout) {
  std::string csv = "t,s,u\n";
  std::vector<double> nodes;
  for (int i = 0; i <= 40; ++i) nodes.push_back(0.25 * i);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      char line[128];
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", nodes[i], nodes[j], std::exp(-(nodes[i] - nodes[j])));
      csv += line;
    }
  }
  const auto fam = EvolutionFamily(TabulatedFamily::from_csv(write_csv("pairs.csv", csv).string()));
  EXPECT_FALSE(fam.reversible());
  EXPECT_NEAR(apply(fam, 2.5, 1.0, Eigen::VectorXd::Ones(1))(0), std::exp(-1.5), 1e-14);
  // between nodes: linear interpolation error of a smooth function
  EXPECT_NEAR(apply(fam, 2.6, 1.1, Eigen::VectorXd::Ones(1))(0), std::exp(-1.5), 5e-3);
  EXPECT_THROW(apply(fam, 1.0, 2.0, Eigen::VectorXd::Ones(1)), DomainError);
}

TEST(Tabulated, RejectsBadFiles) {
  EXPECT_THROW(TabulatedFamily::from_csv("/nonexistent/file.csv"), std::runtime_error);
  EXPECT_THROW(TabulatedFamily::from_csv(write_csv("bad1.csv", "a,b,c\n0,0,1\n").string()), std::runtime_error);
  EXPECT_THROW(TabulatedFamily::from_csv(write_csv("bad2.csv", "t,s,a,b\n0,0,1,2\n").string()), std::runtime_error);
  EXPECT_THROW(TabulatedFamily::from_csv(write_csv("bad3.csv", "t,s,u\n0,0,x\n1,0,1\n").string()), std::runtime_error);
}

TEST(Lattice, GridAndSnapping) {
  const auto g = lattice_grid(0.05, 0.3, 0.1);
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(g[0], 0.05);
  EXPECT_DOUBLE_EQ(g[1], 0.1);
  EXPECT_DOUBLE_EQ(g.back(), 0.30000000000000004);
  EXPECT_THROW(lattice_grid(0, 1, 0), std::invalid_argument);
}

TEST(Sweeps, AgreeWithDirectEvaluation) {
  const auto fam = matrix_ode_family({{"-1", "t"}, {"-0.5*sin(t)", "-2"}});
  const Eigen::Vector2d x(0.2, 0.9);
  const VectorSweep sw = sweep_vector(fam, 0.37, x, 6.0, 0.1);
  for (std::size_t j = 0; j < sw.times.size(); j += 7) {
    const Eigen::VectorXd y = apply(fam, sw.times[j], 0.37, x);
    EXPECT_NEAR(sw.log_growth[j], std::log(y.norm() / x.norm()), 1e-8);
  }
  const NormSweep ns = sweep_operator_norm(fam, 0.37, 6.0, 0.1);
  EXPECT_TRUE(ns.converged);
  for (std::size_t j = 0; j < ns.times.size(); j += 9) {
    EXPECT_NEAR(ns.log_norm[j], std::log(operator_norm(fam, ns.times[j], 0.37).value), 1e-8);
  }
}

TEST(Norms, MaxNormFamily) {
  const auto fam = matrix_ode_family({{"-1", "1"}, {"0", "-1"}}, {}, NormKind::kMax);
  const Eigen::MatrixXd u = propagator(fam, 1.0, 0.0);
  EXPECT_NEAR(operator_norm(fam, 1.0, 0.0).value, u.cwiseAbs().rowwise().sum().maxCoeff(), 1e-14);
  // exact: [[e^-1, e^-1],[0, e^-1]] -> row sum 2/e
  EXPECT_NEAR(operator_norm(fam, 1.0, 0.0).value, 2 * std::exp(-1.0), 1e-9);
}
