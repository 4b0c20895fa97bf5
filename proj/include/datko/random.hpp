#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace datko {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, counter), so results do not depend on evaluation order
/// or on the standard library's distribution implementations.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one value per call).
  double normal();

  /// Uniformly distributed unit vector (euclidean norm).
  Eigen::VectorXd unit_vector(int n);

  std::uint64_t counter() const { return counter_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline double CounterRng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline Eigen::VectorXd CounterRng::unit_vector(int n) {
  Eigen::VectorXd v(n);
  do {
    for (int i = 0; i < n; ++i) v(i) = normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

}  // namespace datko
