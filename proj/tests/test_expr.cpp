#include <cmath>

#include <gtest/gtest.h>

#include "datko/expr.hpp"

using datko::Expr;
using datko::parse_generator;

TEST(Expr, EvaluatesGeneratorOfExample) {
  const Expr f = parse_generator("-2*t + t*sin(t)^2");
  for (double t : {0.0, 0.3, 1.0, 7.5, 31.0}) {
    const double s = std::sin(t);
    EXPECT_DOUBLE_EQ(f(t), -2 * t + t * s * s) << t;
  }
}

TEST(Expr, Precedence) {
  EXPECT_DOUBLE_EQ(parse_generator("1 + 2*3")(0), 7);
  EXPECT_DOUBLE_EQ(parse_generator("2^3^2")(0), 512);   // right associative
  EXPECT_DOUBLE_EQ(parse_generator("-2^2")(0), -4);
  EXPECT_DOUBLE_EQ(parse_generator("2^-1")(0), 0.5);
  EXPECT_DOUBLE_EQ(parse_generator("(1+2)*t")(2), 6);
  EXPECT_DOUBLE_EQ(parse_generator("8/4/2")(0), 1);
  EXPECT_DOUBLE_EQ(parse_generator("10 - 3 - 2")(0), 5);
}

TEST(Expr, FunctionsAndConstants) {
  EXPECT_NEAR(parse_generator("cos(pi)")(0), -1.0, 1e-15);
  EXPECT_DOUBLE_EQ(parse_generator("exp(t)")(1.5), std::exp(1.5));
  EXPECT_DOUBLE_EQ(parse_generator("abs(t - 3)")(1), 2);
  EXPECT_DOUBLE_EQ(parse_generator("1.5e-1*t")(2), 0.3);
}

TEST(Expr, RejectsMalformedInput) {
  for (const char* bad : {"", "1 +", "sin t", "(t", "t)", "foo(t)", "2**t", "x", "1..2", "t t"}) {
    EXPECT_THROW(parse_generator(bad), datko::ParseError) << bad;
  }
  try {
    parse_generator("t + $");
    FAIL();
  } catch (const datko::ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
}

TEST(Expr, NonFiniteEvaluationThrows) {
  EXPECT_THROW(parse_generator("1/t")(0.0), datko::EvalError);
  EXPECT_THROW(parse_generator("exp(t)")(1000.0), datko::EvalError);
  EXPECT_THROW(parse_generator("t^0.5")(-1.0), datko::EvalError);
}

TEST(Expr, PrintParsesBack) {
  for (const char* src : {"-2*t + t*sin(t)^2", "exp(-(t-1)^2)/3", "abs(cos(2*t)) - t^2^0.5", "-t"}) {
    const Expr e = parse_generator(src);
    const Expr back = parse_generator(datko::to_string(e));
    EXPECT_TRUE(e == back) << src << " -> " << datko::to_string(e);
  }
  const Expr built = Expr::binary(Expr::Op::kMul, Expr::constant(-3.0), Expr::variable());
  const Expr again = parse_generator(datko::to_string(built));
  EXPECT_DOUBLE_EQ(again(2.0), -6.0);
}

TEST(Expr, DefaultIsZero) { EXPECT_EQ(Expr()(3.0), 0.0); }
