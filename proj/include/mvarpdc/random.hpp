#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace mvarpdc::rng {

// splitmix64 finalizer; used only to mix seeds and key paths into
// well-separated stream seeds, never as the sampling engine itself.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable tags that keep the independent random streams of the pipeline
// from ever colliding (signal innovations, interference, surrogate phases,
// permutation draws, ...).
enum StreamTag : std::uint64_t {
  kSignal = 0x7369676eULL,
  kInterference = 0x696e7466ULL,
  kControl = 0x6374726cULL,
  kSurrogate = 0x73757272ULL,
  kPermutation = 0x7065726dULL,
};

// Collapses (master seed, key path) into one 64-bit stream seed.  Every
// consumer of randomness derives its own stream this way, e.g.
// derive_stream(seed, {kSignal, trial, channel}), so work scheduled across
// threads draws from disjoint streams and results do not depend on the
// execution order.
inline std::uint64_t derive_stream(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed ^ 0x243f6a8885a308d3ULL);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k));
  return h;
}

// Deterministic sampling on top of std::mt19937_64.  The engine's output
// sequence is fixed by the standard, and all distributions below are spelled
// out explicitly (std::normal_distribution etc. are implementation-defined),
// so a given stream seed reproduces bit-for-bit on any platform.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t stream_seed) : engine_(stream_seed) {}

  // [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // (lo, hi]; used for phase draws where an open lower endpoint avoids
  // log(0) style edge cases elsewhere.
  double uniform_open_closed(double lo, double hi) {
    return hi - (hi - lo) * uniform01();
  }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log() finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t index_below(std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// First `count` entries of a random permutation of {0, ..., n-1}
// (partial Fisher-Yates), i.e. a uniform draw without replacement.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                           std::size_t count,
                                                           RandomStream& rs) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rs.index_below(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace mvarpdc::rng
