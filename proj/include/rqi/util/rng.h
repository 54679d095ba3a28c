#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace rqi {

// SplitMix64. Every random draw in the toolkit goes through this generator so
// that crops, noise, pair orders and weight initialisation are reproducible
// from seeds alone on any platform.
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// bounded(n) uses Lemire's multiply-shift with rejection, so it is exactly
// uniform. uniform() takes the top 53 bits. normal() is Box-Muller on two
// uniforms (no cached second variate).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  // Uniform integer in [0, n); n must be >= 1.
  std::uint64_t bounded(std::uint64_t n);
  // Uniform double in [0, 1).
  double uniform();
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Deterministic child seed. Used whenever a sub-stream (per content, per
// trial, per scale level) needs its own generator.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t salt);

// Stable 64-bit hash of a string (FNV-1a), for seeding per content id.
std::uint64_t hash_string(std::string_view text);

}  // namespace rqi
