#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nbocs/rng.hpp"

namespace nbocs {

// Invalid arguments or violated preconditions.
class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf reached the linear algebra.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact extrema requested above the enumeration cap.
class oracle_unavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every one of the 2^N configurations is already in the dataset.
class space_exhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary vector x in {0,1}^N.
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(std::size_t n) : bits_(n, 0) {}
  Configuration(std::initializer_list<int> bits) {
    bits_.reserve(bits.size());
    for (int b : bits) bits_.push_back(b != 0 ? 1 : 0);
  }
  explicit Configuration(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) b = b != 0 ? 1 : 0;
  }

  // Bit i of `code` becomes x_i (N <= 64).
  static Configuration from_index(std::uint64_t code, std::size_t n) {
    Configuration x(n);
    for (std::size_t i = 0; i < n; ++i) x.bits_[i] = static_cast<std::uint8_t>((code >> i) & 1U);
    return x;
  }

  static Configuration random(std::size_t n, Rng& rng) {
    Configuration x(n);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 64 == 0) word = rng.next();
      x.bits_[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
    }
    return x;
  }

  std::size_t size() const noexcept { return bits_.size(); }
  int operator[](std::size_t i) const noexcept { return bits_[i]; }
  void set(std::size_t i, int v) noexcept { bits_[i] = v != 0 ? 1 : 0; }
  void flip(std::size_t i) noexcept { bits_[i] ^= 1U; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::size_t popcount() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }

  Configuration complement() const {
    Configuration c = *this;
    for (auto& b : c.bits_) b ^= 1U;
    return c;
  }

  // Inverse of from_index; requires N <= 64.
  std::uint64_t to_index() const noexcept {
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < bits_.size() && i < 64; ++i)
      code |= static_cast<std::uint64_t>(bits_[i]) << i;
    return code;
  }

  std::string to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = bits_[i] ? '1' : '0';
    return s;
  }

  static Configuration from_string(const std::string& s) {
    Configuration x(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != '0' && s[i] != '1') throw config_error("configuration string must be 0/1: " + s);
      x.bits_[i] = s[i] == '1' ? 1 : 0;
    }
    return x;
  }

  friend bool operator==(const Configuration&, const Configuration&) = default;
  friend auto operator<=>(const Configuration&, const Configuration&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct ConfigurationHash {
  std::size_t operator()(const Configuration& x) const noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL ^ x.size();
    std::uint64_t word = 0;
    std::size_t filled = 0;
    for (auto b : x.bits()) {
      word = (word << 1) | b;
      if (++filled == 64) {
        h = mix64(h ^ word);
        word = 0;
        filled = 0;
      }
    }
    if (filled) h = mix64(h ^ word);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace nbocs
