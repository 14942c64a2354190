#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "iolw/bytes.hpp"

namespace iolw {

// Deterministic random stream. Every consumer of randomness in a simulation
// run derives its own labeled stream from the root seed, so adding or removing
// one subsystem (an attacker, a detector) never perturbs the draws of another.
//
// All integer/real draws are implemented directly on top of the engine output
// instead of std::*_distribution so that sequences are identical across
// standard library implementations.
class RngStream {
public:
  explicit RngStream(uint64_t seed) : eng_(seed) {}

  uint64_t next() { return eng_(); }

  // Uniform in [0, n); n > 0. Rejection sampling, no modulo bias.
  uint64_t below(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double unit() { return double(eng_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return unit() < p;
  }

  // Number of failures before the next success of a Bernoulli(p) sequence.
  // Used to skip over un-flipped bits when applying channel noise.
  uint64_t geometric_skip(double p) {
    if (p >= 1.0) return 0;
    double u = unit();
    // u == 0 would map to infinity; nudge into the open interval.
    if (u <= 0.0) u = 0x1.0p-53;
    return uint64_t(std::log(u) / std::log1p(-p));
  }

  template <typename Vec>
  void shuffle(Vec& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  void fill(uint8_t* out, size_t n) {
    size_t i = 0;
    while (i + 8 <= n) {
      uint64_t x = eng_();
      for (int k = 0; k < 8; ++k) out[i++] = uint8_t(x >> (8 * k));
    }
    if (i < n) {
      uint64_t x = eng_();
      while (i < n) {
        out[i++] = uint8_t(x);
        x >>= 8;
      }
    }
  }

  Bytes bytes(size_t n) {
    Bytes b(n);
    fill(b.data(), n);
    return b;
  }

private:
  std::mt19937_64 eng_;
};

// Labeled splitting: stream(root, "medium.noise") and stream(root, "attack.0")
// are statistically independent for any root seed.
inline RngStream derive_stream(uint64_t root_seed, std::string_view label) {
  return RngStream(splitmix64(root_seed ^ fnv1a64(label)));
}

} // namespace iolw
