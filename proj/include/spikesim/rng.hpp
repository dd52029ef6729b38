#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace spikesim {

// splitmix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (mix64(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x00000100000001b3ULL;
  }
  return h;
}

// Counter-based random stream: value(i) depends only on (key, i), so draws are
// random-access and independent of evaluation order or parallelism.
class RngStream {
 public:
  RngStream() : key_(0) {}
  explicit RngStream(std::uint64_t key) : key_(key) {}

  static RngStream keyed(std::uint64_t seed, std::uint64_t a) {
    return RngStream(hash_combine(mix64(seed), a));
  }
  static RngStream keyed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return RngStream(hash_combine(hash_combine(mix64(seed), a), b));
  }
  static RngStream keyed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                         std::uint64_t c) {
    return RngStream(
        hash_combine(hash_combine(hash_combine(mix64(seed), a), b), c));
  }

  RngStream substream(std::uint64_t a) const {
    return RngStream(hash_combine(key_, a));
  }

  std::uint64_t key() const { return key_; }

  std::uint64_t bits(std::uint64_t counter) const {
    return mix64(key_ + (counter + 1) * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos(std::uint64_t counter) const {
    return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) via 128-bit multiply; exact and branch-free.
  std::uint64_t uniform_int(std::uint64_t counter, std::uint64_t n) const {
    using u128 = unsigned __int128;
    return static_cast<std::uint64_t>(
        (static_cast<u128>(bits(counter)) * static_cast<u128>(n)) >> 64);
  }

  // Box-Muller; consumes counters 2c and 2c+1.
  double normal(std::uint64_t pair_counter) const {
    const double u1 = uniform_pos(2 * pair_counter);
    const double u2 = uniform(2 * pair_counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential(std::uint64_t counter) const {
    return -std::log(uniform_pos(counter));
  }

  // Poisson count by CDF inversion from a single uniform. Intended for small
  // means (per-step drive); cost grows with lambda.
  int poisson(std::uint64_t counter, double lambda) const {
    if (lambda <= 0.0) return 0;
    const double u = uniform(counter);
    double p = std::exp(-lambda);
    double cdf = p;
    int k = 0;
    while (u > cdf && k < 1024) {
      ++k;
      p *= lambda / k;
      cdf += p;
    }
    return k;
  }

 private:
  std::uint64_t key_;
};

// Poisson count by CDF inversion from one uniform, with exp(-lambda) passed
// in so per-step callers can cache it. Pure: identical inputs give identical
// counts on every code path that draws from the same stream.
inline int poisson_from_uniform(double u, double lambda,
                                double exp_neg_lambda) {
  double p = exp_neg_lambda;
  double cdf = p;
  int k = 0;
  while (u > cdf && k < 1024) {
    ++k;
    p *= lambda / k;
    cdf += p;
  }
  return k;
}

// Stateful draw sequence over a stream, for shuffles and one-off sampling.
class RngSequence {
 public:
  explicit RngSequence(RngStream s) : stream_(s) {}

  double uniform() { return stream_.uniform(next_++); }
  std::uint64_t uniform_int(std::uint64_t n) {
    return stream_.uniform_int(next_++, n);
  }

 private:
  RngStream stream_;
  std::uint64_t next_ = 0;
};

// Fisher-Yates with our own deterministic draws; std::shuffle's consumption
// pattern is implementation-defined.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, RngSequence& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace spikesim
