#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace protorep {

/// Deterministic random source.  All sampling goes through the explicit
/// mappings below (never distribution objects, whose output is
/// implementation-defined), so runs reproduce bit-for-bit across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).  Fixed-point multiply keeps the mapping
  /// platform-independent; the O(n / 2^64) bias is far below statistical
  /// test resolution.
  int below(int n) {
    return static_cast<int>(
        (static_cast<unsigned __int128>(gen_()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  /// Standard normal via the Box-Muller map (explicit formula, one value per
  /// call); u1 is nudged off zero so the log stays finite.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1 > 0.0 ? u1 : 0x1.0p-53));
    return radius * std::cos(2.0 * 3.141592653589793 * u2);
  }

  /// Samples an index from an unnormalized non-negative weight vector.
  template <typename Vec>
  int categorical(const Vec& w, int n) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += w[i];
    double u = uniform() * total;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += w[i];
      if (u < acc) return i;
    }
    for (int i = n - 1; i >= 0; --i) {
      if (w[i] > 0.0) return i;  // guard against accumulated rounding
    }
    return n - 1;
  }

 private:
  std::mt19937_64 gen_;
};

/// Derives per-task seeds from a master seed and two stream coordinates via
/// splitmix64 steps; recorded in run manifests so any run can be replayed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell,
                          std::uint64_t index);

}  // namespace protorep
