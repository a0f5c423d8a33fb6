#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace gridfail {

// splitmix64 finalizer; good avalanche, used both as hash round and output mix.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based random stream: every draw is a pure function of the key built
// by chaining `with(...)` plus a per-draw counter. No mutable state, so draws
// are order-independent and safe to evaluate from any thread.
class CounterRng {
 public:
  CounterRng() = default;
  explicit CounterRng(std::uint64_t seed) : state_(mix64(seed)) {}

  [[nodiscard]] CounterRng with(std::uint64_t v) const {
    CounterRng r;
    r.state_ = mix64(state_ ^ v);
    return r;
  }
  [[nodiscard]] CounterRng with(std::string_view s) const { return with(fnv1a64(s)); }

  [[nodiscard]] std::uint64_t bits(std::uint64_t counter) const {
    return mix64(state_ ^ mix64(counter));
  }

  // Uniform in [0, 1), 53-bit resolution.
  [[nodiscard]] double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  [[nodiscard]] double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  // Standard normal via Box-Muller; consumes counters 2c and 2c+1.
  [[nodiscard]] double normal(std::uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Unbiased-enough integer in [0, n) via 128-bit multiply.
  [[nodiscard]] std::uint64_t pick(std::uint64_t counter, std::uint64_t n) const {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(bits(counter)) * n) >> 64);
  }

 private:
  std::uint64_t state_ = 0;
};

}  // namespace gridfail
