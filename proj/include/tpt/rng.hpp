#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "tpt/errors.hpp"

namespace tpt {

// Deterministic random source. mt19937_64 output is fixed by the standard,
// and all value mappings are written out explicitly here (the standard
// library distributions are implementation-defined), so a given seed yields
// bit-identical streams on every platform/compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    require(n > 0, ErrorKind::Usage, "Rng::below requires n > 0");
    return engine_() % n;
  }

  int int_range(int lo, int hi_inclusive) {
    require(hi_inclusive >= lo, ErrorKind::Usage, "Rng::int_range: empty range [",
            lo, ", ", hi_inclusive, "]");
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
  }

  // Standard normal via Box-Muller; draws two uniforms per pair and caches
  // the second value so the stream stays deterministic.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // Avoid log(0); the shift keeps u1 in (0, 1].
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi_v<double> * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // In-place Fisher-Yates shuffle, explicit so the permutation stream is
  // portable (std::shuffle's draw pattern is implementation-defined).
  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // k distinct values from [0, n), in random order.
  std::vector<int> sample_distinct(int n, int k) {
    require(k >= 0 && k <= n, ErrorKind::Usage, "Rng::sample_distinct: k=", k,
            " out of range for n=", n);
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    shuffle(pool);
    pool.resize(static_cast<std::size_t>(k));
    return pool;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace tpt
