#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "copho/types.hpp"

namespace copho {

/// Deterministic random stream. Every run derives all of its streams from a
/// single 64-bit seed via named splits, so replays are exact.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }

  /// Uniform integer in [0, hi).
  int uniform_int(int hi) { return std::uniform_int_distribution<int>(0, hi - 1)(eng_); }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(eng_); }

  std::uint64_t next_u64() { return eng_(); }

  /// One draw from a categorical distribution given unnormalized weights.
  /// Consumes exactly one uniform.
  int categorical(const Eigen::Ref<const Vector>& weights) {
    const double total = weights.sum();
    if (!(total > 0.0)) throw std::invalid_argument("categorical: nonpositive weight total");
    double u = uniform() * total;
    for (int i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u <= 0.0) return i;
    }
    return static_cast<int>(weights.size()) - 1;  // float slack
  }

  /// Derived independent stream for a named component.
  Rng split(std::string_view tag) const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a over seed bytes then tag
    std::uint64_t s = seed_;
    for (int i = 0; i < 8; ++i) {
      h = (h ^ (s & 0xff)) * 1099511628211ull;
      s >>= 8;
    }
    for (char c : tag) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
    return Rng(h);
  }

  /// Derived stream indexed by a counter (per-graph, per-trajectory, ...).
  Rng split(std::uint64_t salt) const {
    std::uint64_t x = seed_ ^ (salt + 0x9e3779b97f4a7c15ull);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return Rng(x);
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::uint64_t seed_;
};

}  // namespace copho
