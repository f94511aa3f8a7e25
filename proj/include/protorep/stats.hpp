#pragma once

#include <vector>

namespace protorep {

/// Sample mean with a normal-approximation 95% confidence half-width
/// (1.96 s / sqrt(n)).  Fewer than two samples leave the width undefined.
struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;
  int n = 0;
  bool ci_defined = false;
};

MeanCi mean_ci(const std::vector<double>& xs);

}  // namespace protorep
