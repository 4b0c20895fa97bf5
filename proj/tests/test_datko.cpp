#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "datko/admissibility.hpp"
#include "datko/datko.hpp"
#include "datko/phi_operator.hpp"
#include "datko/quadrature.hpp"
#include "oracles.hpp"

using namespace datko;

namespace {

PhiConfig cfg(double alpha) {
  PhiConfig c;
  c.alpha = alpha;
  return c;
}

}  // namespace

TEST(Quadrature, ExactOnCubics) {
  const auto r = simpson_richardson([](double x) { return x * x * x - 2 * x + 1; }, -1.0, 2.0);
  EXPECT_NEAR(r.value, 3.75, 1e-13);
  EXPECT_TRUE(r.converged);
}

TEST(Quadrature, SmoothAndKinked) {
  const auto e = simpson_richardson([](double x) { return std::exp(-x); }, 0.0, 40.0);
  EXPECT_NEAR(e.value, 1 - std::exp(-40.0), 1e-10);
  QuadratureOptions o;
  o.rtol = 1e-10;
  o.max_levels = 14;
  const auto k = simpson_richardson([](double x) { return std::abs(std::sin(x)); }, 0.0, 10.0, o);
  EXPECT_NEAR(k.value, oracle::trapezoid([](double x) { return std::abs(std::sin(x)); }, 0.0, 10.0, 2000000), 1e-7);
  EXPECT_EQ(simpson_richardson([](double) { return 1.0; }, 3.0, 3.0).value, 0.0);
  o.h0 = -1;
  EXPECT_THROW(simpson_richardson([](double) { return 1.0; }, 0.0, 1.0, o), std::invalid_argument);
}

TEST(Quadrature, CompensatedSum) {
  detail::CompensatedSum<double> s;
  s.add(1.0);
  for (int i = 0; i < 1000; ++i) s.add(1e-16);
  s.add(-1.0);
  EXPECT_NEAR(s.value(), 1e-13, 1e-24);  // plain summation returns 0
}

TEST(DatkoIntegral, PureDecayRatios) {
  const auto fam = scalar_exp_family("-t");
  const DatkoQuadConfig q;
  for (auto [p, alpha] : std::vector<std::pair<double, double>>{{1, -1}, {2, -1}, {2, -0.5}, {3, -0.2}}) {
    const auto u = SampledFunction::constant(Eigen::VectorXd::Constant(1, 0.7));
    const auto m = datko_integral(fam, u, p, 2.0, cfg(alpha), q);
    ASSERT_TRUE(m.ratio_k.has_value());
    EXPECT_NEAR(*m.ratio_k, 1.0 / p, 1e-8) << p << " " << alpha;
  }
}

TEST(DatkoIntegral, ExampleAgainstDenseOracle) {
  const auto fam = scalar_exp_family("-2*t + t*sin(t)^2");
  const double alpha = -0.9, p = 1.5, t = 1.0;
  DatkoQuadConfig q;
  q.t_int = 10.0;
  const auto u = SampledFunction::constant(Eigen::VectorXd::Ones(1));
  const auto m = datko_integral(fam, u, p, t, cfg(alpha), q);
  // phi(xi, Phi(t)u) = e^{f(xi)-f(t)} sup_{tau in [xi, xi+40]} e^{-alpha(tau-xi)} e^{f(tau)-f(xi)}
  const auto phi_at = [&](double xi) {
    return oracle::brute_sup([&](double tau) { return std::exp(oracle::example_f(tau) - oracle::example_f(t)); }, xi,
                             alpha, 40.0, 8000);
  };
  const double want = oracle::trapezoid([&](double xi) { return std::pow(phi_at(xi), p); }, t, t + 10.0, 4000);
  EXPECT_NEAR(m.integral, want, 1e-4 * want);
}

TEST(DatkoIntegral, TailCertificate) {
  const auto fam = scalar_exp_family("-t");
  PhiConfig c = cfg(-0.5);
  const auto s = uniform_grid(0.0, 50.0, 0.5);
  c.tail = TailBound{-0.9, bounding_function(fam, -0.9, s, c.horizon)};
  const auto u = SampledFunction::constant(Eigen::VectorXd::Ones(1));
  const auto m = datko_integral(fam, u, 1.0, 1.0, c, DatkoQuadConfig{});
  ASSERT_TRUE(m.tail_bound.has_value());
  EXPECT_NEAR(*m.tail_bound, std::exp(-0.9 * 40.0) / 0.9, 1e-22);
  EXPECT_TRUE(m.certified);
}

TEST(DatkoIntegral, ZeroInput) {
  const auto fam = scalar_exp_family("-t", 2);
  const auto m = datko_integral(fam, SampledFunction::constant(Eigen::VectorXd::Zero(2)), 1.0, 0.0, cfg(-0.5),
                                DatkoQuadConfig{}, true);
  EXPECT_EQ(m.integral, 0.0);
  EXPECT_FALSE(m.ratio_k.has_value());
  EXPECT_TRUE(m.bounded);
}

TEST(Necessity, PureDecay) {
  const auto fam = scalar_exp_family("-t");
  const std::vector<std::pair<double, Eigen::VectorXd>> probes = {{0.0, Eigen::VectorXd::Ones(1)},
                                                                  {3.0, Eigen::VectorXd::Constant(1, -2.0)}};
  const auto rep = necessity_check(fam, 1.0, probes, cfg(-1.0), DatkoQuadConfig{});
  EXPECT_TRUE(rep.pass);
  EXPECT_NEAR(rep.max_ratio, 1.0, 1e-6);
  EXPECT_THROW(necessity_check(fam, 1.0, probes, cfg(0.0), DatkoQuadConfig{}), std::invalid_argument);
}

TEST(Necessity, FailsWhenConstantExceedsBound) {
  // alpha = -2 is not admissible for decay rate 1: ratio ~1 against bound 1/2
  const auto fam = scalar_exp_family("-t");
  const std::vector<std::pair<double, Eigen::VectorXd>> probes = {{0.0, Eigen::VectorXd::Ones(1)}};
  PhiConfig c = cfg(-2.0);
  c.horizon = 5.0;
  DatkoQuadConfig q;
  q.t_int = 5.0;
  const auto rep = necessity_check(fam, 1.0, probes, c, q);
  EXPECT_FALSE(rep.pass);
}

TEST(DatkoConstant, PureDecayIsOne) {
  const auto fam = scalar_exp_family("-t");
  const auto suite = default_probe_suite(1, 10.0, 3, 4, 2);
  const auto m = bounding_function(fam, 0.0, suite.times, 40.0);
  const auto k = measure_datko_constant(fam, 1.0, suite, m, cfg(0.0), DatkoQuadConfig{});
  EXPECT_TRUE(k.bounded);
  EXPECT_NEAR(k.k, 1.0, 1e-6);
  EXPECT_EQ(k.probes, 12);
}

TEST(DatkoConstant, IdentityIsUnbounded) {
  const auto fam = scalar_exp_family("0");
  const auto suite = default_probe_suite(1, 5.0, 3, 2, 0);
  const auto m = bounding_function(fam, 0.0, suite.times, 40.0);
  const auto k = measure_datko_constant(fam, 1.0, suite, m, cfg(0.0), DatkoQuadConfig{});
  EXPECT_FALSE(k.bounded);
}

TEST(Certificate, ConstantsFollowFormulas) {
  const auto c = certificate_constants(2.0, 0.3, 1.7, 0.25);
  const double n = std::max(std::exp(0.6) * 1.7, std::exp(0.6));
  EXPECT_EQ(c.n, n);
  EXPECT_EQ(c.rate, 0.25 / (2.0 * n));
  EXPECT_EQ(c.n_tilde, std::pow(n / 0.75, 0.5));
  const auto small = certificate_constants(1.0, 0.0, 0.2, 0.5);
  EXPECT_EQ(small.n, 1.0);
  EXPECT_THROW(certificate_constants(1.0, 0.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(certificate_constants(1.0, 0.0, 0.0, 0.5), std::invalid_argument);
}

TEST(Certificate, PureDecayPassesWithRatioFormula) {
  const auto fam = scalar_exp_family("-t");
  const auto grid = uniform_grid(0.0, 10.0, 1.0);
  const auto m = bounding_function(fam, 0.0, grid, 40.0);
  const auto c = build_certificate(fam, 1.0, 1.0, 0.0, 0.5, m, grid, grid);
  EXPECT_TRUE(c.passed);
  EXPECT_EQ(c.violations, 0);
  for (const auto& v : c.verification) {
    EXPECT_NEAR(v.bound / v.norm, 2.0 * std::exp(0.5 * (v.t - v.s)), 1e-12 * v.bound / v.norm);
  }
  EXPECT_NEAR(c.margin, 0.5, 1e-15);
}

TEST(Certificate, FailureReportsWorstPair) {
  const auto fam = scalar_exp_family("-t + 2*sin(t)");
  const auto grid = uniform_grid(0.0, 10.0, 0.5);
  BoundingFunction m = bounding_function(fam, 0.0, grid, 40.0);
  for (auto& v : m.m) v = 0.1;  // far too small
  const auto c = build_certificate(fam, 1.0, 1.0, 0.0, 0.5, m, grid, grid);
  EXPECT_FALSE(c.passed);
  EXPECT_GT(c.violations, 0);
  EXPECT_LT(c.margin, 0.0);
  EXPECT_GE(c.worst_pair.first, c.worst_pair.second);
  EXPECT_THROW(build_certificate(fam, 1.0, 1.0, -0.5, 0.5, m, grid, grid), std::invalid_argument);
}

TEST(LyapunovW, AdditivityOnPureDecay) {
  const auto fam = scalar_exp_family("-t");
  const auto u = apply_phi_t({fam, 0.5}, SampledFunction::constant(Eigen::VectorXd::Ones(1)));
  const auto rep = check_W_additivity(fam, u, 1.0, 0.5, 3.0, cfg(-0.5), DatkoQuadConfig{});
  EXPECT_TRUE(rep.pass) << rep.residual;
  // W(t) = e^{-(t - t0)} for this family
  EXPECT_NEAR(rep.w_t0, 1.0, 1e-8);
  EXPECT_NEAR(rep.w_t, std::exp(-2.5), 1e-8);
}
