#pragma once

#include <cmath>
#include <cstdint>

namespace yflow {

// PCG64 (XSL-RR 128/64). Counter-style splittable: each (seed, stream) pair
// selects an independent sequence via the odd LCG increment, so e.g. data
// generation and weight init never share draws even with equal seeds.
class Pcg64 {
 public:
  explicit Pcg64(std::uint64_t seed, std::uint64_t stream = 0) {
    state_ = 0;
    inc_ = ((static_cast<u128>(stream) << 1u) | 1u);
    next();
    state_ += (static_cast<u128>(seed) << 64) | seed;
    next();
  }

  std::uint64_t next() {
    u128 old = state_;
    state_ = old * MULT + inc_;
    std::uint64_t xored = static_cast<std::uint64_t>((old >> 64) ^ old);
    unsigned rot = static_cast<unsigned>(old >> 122);
    return (xored >> rot) | (xored << ((-rot) & 63u));
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; caches the second deviate.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n). Rejection-free Lemire-style bounded draw is
  // overkill here; modulo bias at n << 2^64 is far below anything observable,
  // but use multiply-shift anyway since it is one line.
  std::uint64_t bounded(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<u128>(next()) * static_cast<u128>(n)) >> 64);
  }

 private:
  using u128 = unsigned __int128;
  static constexpr u128 MULT =
      (static_cast<u128>(2549297995355413924ULL) << 64) | 4865540595714422341ULL;
  u128 state_;
  u128 inc_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream ids used across the project so independent consumers of the same
// user-facing seed never overlap.
namespace streams {
constexpr std::uint64_t kInit = 0x11;
constexpr std::uint64_t kData = 0x22;
constexpr std::uint64_t kTrain = 0x33;
constexpr std::uint64_t kSample = 0x44;
constexpr std::uint64_t kProbe = 0x55;
}  // namespace streams

}  // namespace yflow
