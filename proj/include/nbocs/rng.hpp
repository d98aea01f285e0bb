#pragma once

// Portable random streams.
//
// Everything here is bit-exact across compilers and standard libraries:
// the standard <random> distributions are implementation-defined, so the
// project never uses them for anything that lands in an output file.
//
//   * splitmix64     seed expansion and hashing
//   * xoshiro256**   the stream generator
//   * uniform01      top 53 bits of a draw, scaled by 2^-53, in [0, 1)
//   * normal         Box-Muller on (u1, u2) with u1 in (0, 1], both outputs
//                    of a pair are used (the sine branch is cached)
//
// Named substreams are derived from a parent seed and a text label with
// derive_seed(); see the README for the exact recipe.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

namespace nbocs {

inline constexpr std::uint64_t splitmix64_step(std::uint64_t& state) noexcept {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  std::uint64_t s = x;
  return splitmix64_step(s);
}

// FNV-1a, 64 bit.
inline constexpr std::uint64_t fnv1a64(std::string_view text,
                                       std::uint64_t h = 0xCBF29CE484222325ULL) noexcept {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Child seed for a labelled substream. Pure function of its arguments.
inline constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                                           std::uint64_t index = 0) noexcept {
  return mix64(mix64(parent ^ fnv1a64(label)) + index * 0x9E3779B97F4A7C15ULL);
}

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64_step(sm);
    has_spare_ = false;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // (0, 1]
  double uniform01_open_low() noexcept {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound) by Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bit() noexcept { return (next() >> 63) != 0; }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01_open_low();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nbocs
