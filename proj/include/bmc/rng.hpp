#pragma once

// Counter-based random numbers: Philox4x32-10 (Salmon, Moraes, Dror, Shaw,
// "Parallel random numbers: as easy as 1, 2, 3", SC 2011).
//
// Every draw in the simulator is a pure function of
//   (seed, trial, generation, particle ordinal, draw index)
// so results do not depend on iteration order or thread schedule.

#include <array>
#include <cstdint>
#include <limits>

namespace bmc::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

namespace detail {

inline constexpr std::uint32_t kMul0 = 0xD2511F53;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

constexpr Counter round(const Counter& c, const Key& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace detail

/// The Philox4x32 bijection with 10 rounds.
constexpr Counter philox4x32_10(Counter ctr, Key key) {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      key[0] += detail::kWeyl0;
      key[1] += detail::kWeyl1;
    }
    ctr = detail::round(ctr, key);
  }
  return ctr;
}

constexpr Key key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// Maps the first two output words to a double in [0, 1) with 53 random bits.
constexpr double to_unit(const Counter& out) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Keyed uniform draws for one particle at one generation of one trial.
/// Counter layout: {draw, ordinal, generation, trial} (low 32 bits of each).
class ParticleStream {
 public:
  ParticleStream(std::uint64_t seed, std::uint32_t trial, std::uint32_t generation, std::uint32_t ordinal)
      : key_(key_from_seed(seed)), trial_(trial), generation_(generation), ordinal_(ordinal) {}

  double uniform(std::uint32_t draw) const {
    return to_unit(philox4x32_10({draw, ordinal_, generation_, trial_}, key_));
  }

 private:
  Key key_;
  std::uint32_t trial_, generation_, ordinal_;
};

/// Sequential engine over the counter space of one stream, satisfying
/// UniformRandomBitGenerator. Used where draws need not be keyed per
/// particle (Galton-Watson tree sizes, auxiliary sampling). A domain tag keeps
/// its counters disjoint from ParticleStream's.
class StreamEngine {
 public:
  using result_type = std::uint64_t;

  StreamEngine(std::uint64_t seed, std::uint64_t stream)
      : key_(key_from_seed(seed ^ 0xA5A5'5A5A'C3C3'3C3CULL)), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (spare_valid_) {
      spare_valid_ = false;
      return spare_;
    }
    const Counter out = philox4x32_10({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                                       static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                                      key_);
    ++counter_;
    spare_ = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    spare_valid_ = true;
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  }

  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  Key key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::uint64_t spare_ = 0;
  bool spare_valid_ = false;
};

}  // namespace bmc::rng
