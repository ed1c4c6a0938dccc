// Deterministic random streams. All randomness in the project flows from a
// master seed through named sub-streams, so inserting or reordering one
// consumer never perturbs the draws seen by another.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "mtgen/util/hash.hpp"

namespace mtgen::util {

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // Derive an independent stream for (parent seed, label, indices).
  static Rng derive(uint64_t seed, std::string_view label, uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = hash_str(label, seed);
    h = hash_combine(h, a);
    h = hash_combine(h, b);
    return Rng(h);
  }

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1). 53-bit mantissa.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n > 0.
  uint64_t below(uint64_t n) { return gen_() % n; }

  // Standard normal via Box-Muller. std::normal_distribution is
  // implementation-defined, so we roll the transform by hand.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mtgen::util
