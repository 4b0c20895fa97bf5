#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "datko/admissibility.hpp"
#include "datko/phi.hpp"
#include "oracles.hpp"

using namespace datko;

namespace {

PhiConfig cfg(double alpha) {
  PhiConfig c;
  c.alpha = alpha;
  return c;
}

}  // namespace

TEST(Phi, ExampleClosedForm) {
  const auto fam = scalar_exp_family("-2*t + t*sin(t)^2");
  const auto u = SampledFunction::constant(Eigen::VectorXd::Constant(1, -2.5));
  for (int i = 0; i < 25; ++i) {
    const double t = 4 * M_PI * i / 24;
    const double want = 2.5 * oracle::example_phi_minus1(t);
    EXPECT_NEAR(phi(fam, u, t, cfg(-1.0)).value, want, 1e-6 * want) << t;
  }
}

TEST(Phi, BruteForceOnMatrixFamily) {
  const auto fam = matrix_ode_family({{"-1", "2*sin(t)"}, {"0", "-0.5"}});
  const oracle::MatFn a = [](double t) {
    Eigen::Matrix2d m;
    m << -1, 2 * std::sin(t), 0, -0.5;
    return Eigen::MatrixXd(m);
  };
  const Eigen::Vector2d x(0.0, 1.0);
  PhiConfig c = cfg(-0.3);
  c.horizon = 10.0;
  const double t = 1.3;
  // state at tau by chaining RK4 over small legs
  std::vector<double> taus;
  std::vector<Eigen::VectorXd> states;
  Eigen::VectorXd y = x;
  const int legs = 20000;
  for (int i = 0; i <= legs; ++i) {
    const double tau = t + c.horizon * i / legs;
    if (i > 0) y = oracle::rk4_propagator(a, tau, taus.back(), 4) * y;
    taus.push_back(tau);
    states.push_back(y);
  }
  double want = 0.0;
  for (int i = 0; i <= legs; ++i) want = std::max(want, std::exp(0.3 * (taus[i] - t)) * states[i].norm());
  const double got = state_norm_t(fam, x, t, c).value;
  EXPECT_NEAR(got, want, 1e-6 * want);
  EXPECT_GE(got, want * (1 - 1e-9));
}

TEST(Phi, ZeroInputIsZero) {
  const auto fam = scalar_exp_family("-t", 3);
  const auto v = state_norm_t(fam, Eigen::VectorXd::Zero(3), 2.0, cfg(0.5));
  EXPECT_EQ(v.value, 0.0);
}

TEST(Phi, TailCertificate) {
  const auto fam = scalar_exp_family("-t");
  PhiConfig c = cfg(-0.5);
  const auto s = uniform_grid(0.0, 5.0, 0.5);
  c.tail = TailBound{-0.9, bounding_function(fam, -0.9, s, c.horizon)};
  const auto v = state_norm_t(fam, Eigen::VectorXd::Ones(1), 2.0, c);
  EXPECT_DOUBLE_EQ(v.value, 1.0);
  ASSERT_TRUE(v.tail_value.has_value());
  EXPECT_NEAR(*v.tail_value, std::exp(-0.4 * 40.0), 1e-20);
  EXPECT_TRUE(v.certified);
  // outside the reference grid: no tail value, no certificate
  const auto far = state_norm_t(fam, Eigen::VectorXd::Ones(1), 7.0, c);
  EXPECT_FALSE(far.certified);
  // without a tail reference nothing is certified
  EXPECT_FALSE(state_norm_t(fam, Eigen::VectorXd::Ones(1), 2.0, cfg(-0.5)).certified);
}

TEST(Phi, NoCertificateAtBoundary) {
  // alpha exactly at the boundary for U = e^{-(t-s)}; the weight is flat, so
  // a reference exponent just below alpha leaves a tail of the same size.
  const auto fam = scalar_exp_family("-t");
  PhiConfig c = cfg(-1.0);
  c.horizon = 1.0;
  const auto s = uniform_grid(0.0, 2.0, 0.5);
  c.tail = TailBound{-1.0 - 1e-9, bounding_function(fam, -1.0 - 1e-9, s, c.horizon)};
  const auto v = state_norm_t(fam, Eigen::VectorXd::Ones(1), 1.0, c);
  EXPECT_FALSE(v.certified);
}

TEST(Phi, Sandwich) {
  const auto fam = matrix_ode_family({{"-1", "t"}, {"0", "-2"}});
  const PhiConfig c = cfg(-0.2);
  const std::vector<double> at = {3.0};
  const double m = bounding_function(fam, -0.2, at, c.horizon).m[0];
  const Eigen::Vector2d x(0.4, -1.0);
  const double v = state_norm_t(fam, x, 3.0, c).value;
  EXPECT_GE(v, x.norm());
  EXPECT_LE(v, m * x.norm() * (1 + 2e-6));
}

TEST(Phi, MonotoneInAlphaAndGrid) {
  const auto fam = scalar_exp_family("-2*t + t*sin(t)^2");
  const auto u = SampledFunction::constant(Eigen::VectorXd::Ones(1));
  PhiConfig a = cfg(-1.0);
  a.refine_depth = 0;
  PhiConfig b = a;
  b.alpha = -0.7;
  PhiConfig fine = a;
  fine.tau_step = a.tau_step / 2;
  for (double t : {0.0, 1.1, 5.5, 9.0}) {
    const double va = phi(fam, u, t, a).value;
    EXPECT_LE(phi(fam, u, t, b).value, va);
    EXPECT_GE(phi(fam, u, t, fine).value, va);
  }
}

TEST(Phi, Homogeneous) {
  const auto fam = matrix_ode_family({{"-1", "t"}, {"0", "-2"}});
  const auto u = SampledFunction::closed_form({parse_generator("cos(t)"), parse_generator("1 + t")});
  const PhiConfig c = cfg(-0.4);
  for (double k : {-3.0, 0.5, 2.0}) {
    const double v = phi(fam, u, 1.5, c).value;
    const double vk = phi(fam, k * u, 1.5, c).value;
    EXPECT_NEAR(vk, std::abs(k) * v, 1e-12 * std::abs(k) * v);
  }
}

TEST(Phi, ProfileMatchesSingleQueries) {
  const auto fam = scalar_exp_family("-2*t + t*sin(t)^2");
  const PhiConfig c = cfg(-0.9);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.7);
  const PhiProfile profile(fam, 0.5, x, 60.0, c);
  for (double xi : {0.5, 3.21, 10.0, 20.5}) {
    const Eigen::VectorXd y = apply(fam, xi, 0.5, x);
    const double direct = state_norm_t(fam, y, xi, c).value;
    EXPECT_NEAR(profile.at(xi).value, direct, 1e-6 * direct) << xi;
  }
  EXPECT_THROW(profile.at(20.6), std::domain_error);
}

TEST(Phi, ProfileWithSpanEqualToHorizon) {
  // (1.3 + 40) - 40 rounds below 1.3; the single query point must still be t0
  const auto fam = matrix_ode_family({{"-1", "2*sin(t)"}, {"-0.5*cos(t)", "-2"}});
  const PhiConfig c = cfg(-0.5);
  const Eigen::VectorXd x = Eigen::Vector2d(0.3, -1.0);
  const PhiProfile profile(fam, 1.3, x, c.horizon, c);
  const double direct = state_norm_t(fam, x, 1.3, c).value;
  EXPECT_NEAR(profile.at(1.3).value, direct, 1e-9 * direct);
}

TEST(Phi, RejectsBadConfigAndDomain) {
  const auto fam = scalar_exp_family("-t");
  PhiConfig c = cfg(0.0);
  c.tau_step = 0.0;
  EXPECT_THROW(state_norm_t(fam, Eigen::VectorXd::Ones(1), 0.0, c), std::invalid_argument);
  const auto u = SampledFunction::constant(Eigen::VectorXd::Ones(1));
  EXPECT_THROW(phi(fam, u, -1.0, cfg(0.0)), std::invalid_argument);
  EXPECT_THROW(state_norm_t(fam, Eigen::VectorXd::Ones(2), 0.0, cfg(0.0)), std::invalid_argument);
}

TEST(Continuity, IdentityFamilySine) {
  const auto fam = scalar_exp_family("0");
  const auto u = SampledFunction::closed_form({parse_generator("sin(t)")});
  const auto rep = continuity_probe(fam, u, cfg(0.0), 0.0, 2 * M_PI, 64);
  EXPECT_GE(rep.ratio, 0.4);
  EXPECT_LE(rep.ratio, 0.6);
  EXPECT_TRUE(rep.pass);
}

TEST(Continuity, ConstantPhiHasZeroModulus) {
  const auto fam = scalar_exp_family("-t");
  const auto u = SampledFunction::constant(Eigen::VectorXd::Ones(1));
  const auto rep = continuity_probe(fam, u, cfg(-1.0), 0.0, 3.0, 16);
  EXPECT_EQ(rep.delta_h, 0.0);
  EXPECT_EQ(rep.delta_half, 0.0);
  EXPECT_TRUE(rep.pass);
}

TEST(Continuity, ExampleWithinDerivativeBound) {
  const auto fam = scalar_exp_family("-2*t + t*sin(t)^2");
  const auto u = SampledFunction::constant(Eigen::VectorXd::Ones(1));
  const int steps = 32;
  const double t0 = 0.0, t1 = 2.0;
  const auto rep = continuity_probe(fam, u, cfg(-1.0), t0, t1, steps);
  // |d/dt e^{t cos^2 t}| = e^{t cos^2 t} |cos^2 t - t sin 2t|
  double lip = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double t = t0 + (t1 - t0) * i / 20000;
    const double c = std::cos(t);
    lip = std::max(lip, oracle::example_phi_minus1(t) * std::abs(c * c - t * std::sin(2 * t)));
  }
  const double h = (t1 - t0) / steps;
  EXPECT_LE(rep.delta_h, lip * h * (1 + 1e-6));
  EXPECT_LE(rep.delta_half, lip * h / 2 * (1 + 1e-6));
  EXPECT_GT(rep.delta_h, 0.0);
}
