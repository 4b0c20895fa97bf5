#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace datko {

class IntegratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
struct DormandPrinceOptions {
  Scalar rtol = Scalar(1e-10);
  Scalar atol = Scalar(1e-10);
  Scalar max_step = Scalar(0.1);
  int max_steps = 1000000;
};

struct IntegratorStats {
  int accepted = 0;
  int rejected = 0;
};

/// Embedded Runge-Kutta 5(4) of Dormand and Prince with local extrapolation.
///
/// Integrates y' = rhs(t, y) from t0 to t1 (either direction) and returns
/// y(t1). State may be any fixed- or dynamic-size Eigen dense type; matrices
/// are integrated column by column in one pass.
template <typename State, typename Rhs>
State integrate_dormand_prince(Rhs&& rhs, typename State::Scalar t0, State y,
                               typename State::Scalar t1,
                               const DormandPrinceOptions<typename State::Scalar>& opts,
                               IntegratorStats* stats = nullptr) {
  using Scalar = typename State::Scalar;
  using std::abs;
  using std::max;
  using std::min;
  using std::pow;

  const Scalar span = t1 - t0;
  if (span == Scalar(0)) return y;
  const Scalar dir = span > 0 ? Scalar(1) : Scalar(-1);

  constexpr Scalar c2 = Scalar(1) / 5, c3 = Scalar(3) / 10, c4 = Scalar(4) / 5, c5 = Scalar(8) / 9;
  constexpr Scalar a21 = Scalar(1) / 5;
  constexpr Scalar a31 = Scalar(3) / 40, a32 = Scalar(9) / 40;
  constexpr Scalar a41 = Scalar(44) / 45, a42 = Scalar(-56) / 15, a43 = Scalar(32) / 9;
  constexpr Scalar a51 = Scalar(19372) / 6561, a52 = Scalar(-25360) / 2187,
                   a53 = Scalar(64448) / 6561, a54 = Scalar(-212) / 729;
  constexpr Scalar a61 = Scalar(9017) / 3168, a62 = Scalar(-355) / 33, a63 = Scalar(46732) / 5247,
                   a64 = Scalar(49) / 176, a65 = Scalar(-5103) / 18656;
  constexpr Scalar b1 = Scalar(35) / 384, b3 = Scalar(500) / 1113, b4 = Scalar(125) / 192,
                   b5 = Scalar(-2187) / 6784, b6 = Scalar(11) / 84;
  // difference between the 5th and embedded 4th order weights
  constexpr Scalar e1 = Scalar(71) / 57600, e3 = Scalar(-71) / 16695, e4 = Scalar(71) / 1920,
                   e5 = Scalar(-17253) / 339200, e6 = Scalar(22) / 525, e7 = Scalar(-1) / 40;

  Scalar t = t0;
  Scalar h = min(opts.max_step, abs(span));
  State k1 = rhs(t, y);
  int steps = 0;
  while (dir * (t1 - t) > Scalar(0)) {
    if (++steps > opts.max_steps) {
      throw IntegratorError("Dormand-Prince: step budget exhausted at t = " + std::to_string(double(t)));
    }
    const Scalar remaining = abs(t1 - t);
    bool last = false;
    if (h >= remaining) {
      h = remaining;
      last = true;
    }
    const Scalar hs = dir * h;
    const State k2 = rhs(t + c2 * hs, (y + hs * (a21 * k1)).eval());
    const State k3 = rhs(t + c3 * hs, (y + hs * (a31 * k1 + a32 * k2)).eval());
    const State k4 = rhs(t + c4 * hs, (y + hs * (a41 * k1 + a42 * k2 + a43 * k3)).eval());
    const State k5 = rhs(t + c5 * hs, (y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)).eval());
    const State k6 =
        rhs(t + hs, (y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)).eval());
    State y_new = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Scalar t_new = last ? t1 : t + hs;
    const State k7 = rhs(t_new, y_new);
    const State err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const auto scale = (opts.atol + opts.rtol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array());
    const Scalar err_norm = std::sqrt((err.array() / scale).square().mean());
    if (!std::isfinite(double(err_norm))) {
      throw IntegratorError("Dormand-Prince: non-finite state at t = " + std::to_string(double(t)));
    }

    if (err_norm <= Scalar(1)) {
      t = t_new;
      y = std::move(y_new);
      k1 = k7;  // first-same-as-last
      if (stats != nullptr) ++stats->accepted;
      const Scalar factor =
          err_norm == Scalar(0) ? Scalar(5) : min(Scalar(5), Scalar(0.9) * pow(err_norm, Scalar(-0.2)));
      h = min(opts.max_step, h * max(Scalar(1), factor));
    } else {
      if (stats != nullptr) ++stats->rejected;
      h *= max(Scalar(0.2), Scalar(0.9) * pow(err_norm, Scalar(-0.2)));
      if (h <= Scalar(16) * std::numeric_limits<Scalar>::epsilon() * max(Scalar(1), abs(t))) {
        throw IntegratorError("Dormand-Prince: step size underflow at t = " + std::to_string(double(t)));
      }
    }
  }
  return y;
}

}  // namespace datko
