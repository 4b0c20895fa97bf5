#pragma once

#include <optional>
#include <vector>

namespace datko {

/// Samples of M_alpha(s) = max over t in [s, s+horizon] of e^{-alpha(t-s)} ||U(t,s)||.
struct BoundingFunction {
  double alpha = 0.0;
  double horizon = 0.0;
  std::vector<double> s;  // increasing
  std::vector<double> m;

  /// M at a sample time, or the larger of the two bracketing samples between
  /// them. Empty outside [s.front(), s.back()].
  std::optional<double> lookup(double at) const;
};

}  // namespace datko
