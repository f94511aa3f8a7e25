#include "protorep/stats.hpp"

#include <cmath>

namespace protorep {

MeanCi mean_ci(const std::vector<double>& xs) {
  MeanCi out;
  out.n = static_cast<int>(xs.size());
  if (out.n == 0) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / out.n;
  if (out.n < 2) return out;
  // Two-pass variance keeps cancellation error away from the mean.
  double ss = 0.0;
  for (double x : xs) {
    const double d = x - out.mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / (out.n - 1));
  out.half_width = 1.96 * sd / std::sqrt(static_cast<double>(out.n));
  out.ci_defined = true;
  return out;
}

}  // namespace protorep
