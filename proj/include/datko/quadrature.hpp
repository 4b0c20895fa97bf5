#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace datko {

struct QuadratureOptions {
  double h0 = 0.05;
  double rtol = 1e-8;
  int max_levels = 10;
};

namespace detail {

// Neumaier compensated sum.
template <typename Scalar>
struct CompensatedSum {
  Scalar sum{};
  Scalar carry{};
  void add(Scalar v) {
    using std::abs;
    const Scalar t = sum + v;
    carry += abs(sum) >= abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  Scalar value() const { return sum + carry; }
};

}  // namespace detail

template <typename Scalar>
struct QuadratureResult {
  Scalar value{};     // Richardson-extrapolated
  Scalar last{};      // finest Simpson sum
  Scalar previous{};  // the one before
  int levels = 0;
  long evaluations = 0;
  bool converged = false;
};

/// Composite Simpson on [a, b] starting near step h0, halving the step and
/// reusing every previous node until successive sums agree to rtol. The
/// difference one level earlier must also be within 32 rtol: an isolated
/// agreement can be luck when the integrand has kinks. The returned value
/// adds the Richardson correction (S2 - S1)/15.
template <typename Scalar = double, typename F>
QuadratureResult<Scalar> simpson_richardson(F&& f, Scalar a, Scalar b, const QuadratureOptions& opts = {}) {
  using std::abs;
  QuadratureResult<Scalar> r;
  if (!(opts.h0 > 0) || !(opts.rtol > 0) || opts.max_levels < 1) {
    throw std::invalid_argument("simpson_richardson: bad options");
  }
  if (b == a) {
    r.converged = true;
    return r;
  }
  long n = static_cast<long>(std::ceil(abs(b - a) / opts.h0));
  n = std::max(2L, n + (n % 2));
  const Scalar edge = f(a) + f(b);
  r.evaluations = 2;
  detail::CompensatedSum<Scalar> inner;  // nodes already used as "even" points at the next level
  auto simpson = [&](Scalar h, const detail::CompensatedSum<Scalar>& odd) {
    const Scalar body = edge + 2 * inner.sum + 4 * odd.sum + (2 * inner.carry + 4 * odd.carry);
    return h * body / 3;
  };
  {
    const Scalar h = (b - a) / static_cast<Scalar>(n);
    detail::CompensatedSum<Scalar> odd;
    for (long i = 1; i < n; ++i) {
      const Scalar v = f(a + h * static_cast<Scalar>(i));
      if (i % 2 == 1) {
        odd.add(v);
      } else {
        inner.add(v);
      }
    }
    r.evaluations += n - 1;
    r.last = simpson(h, odd);
    inner.add(odd.sum);
    inner.add(odd.carry);
  }
  Scalar prev_diff = std::numeric_limits<Scalar>::infinity();
  for (int level = 1; level <= opts.max_levels; ++level) {
    n *= 2;
    const Scalar h = (b - a) / static_cast<Scalar>(n);
    detail::CompensatedSum<Scalar> odd;
    for (long i = 1; i < n; i += 2) odd.add(f(a + h * static_cast<Scalar>(i)));
    r.evaluations += n / 2;
    r.previous = r.last;
    r.last = simpson(h, odd);
    inner.add(odd.sum);
    inner.add(odd.carry);
    r.levels = level;
    const Scalar diff = abs(r.last - r.previous);
    const Scalar tol = opts.rtol * abs(r.last);
    if (diff == 0 || (diff <= tol && prev_diff <= 32 * tol)) {
      r.converged = true;
      break;
    }
    prev_diff = diff;
  }
  r.value = r.last + (r.last - r.previous) / 15;
  return r;
}

}  // namespace datko
