#pragma once

#include <cstdint>
#include <random>

namespace dishpomdp {

namespace detail {

// splitmix64 finalizer; used to mix seeds and stream ids.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

// xoshiro256**: fast to seed (four splitmix64 steps), good quality, and a
// UniformRandomBitGenerator usable with the standard distributions.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~static_cast<result_type>(0); }

  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      word = z ^ (z >> 31);
    }
  }

  result_type operator()() {
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

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

}  // namespace detail

/// Seeded random stream. Sub-streams are derived from the root seed and a
/// list of integer ids, never from consumed generator state, so independent
/// consumers reproduce exactly regardless of draw order elsewhere.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), gen_(detail::mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  RngStream substream(std::uint64_t a) const {
    return RngStream(detail::hash_combine(seed_, a));
  }
  RngStream substream(std::uint64_t a, std::uint64_t b) const {
    return RngStream(detail::hash_combine(detail::hash_combine(seed_, a), b));
  }
  RngStream substream(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    return substream(a, b).substream(c);
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }

  // uniform integer in [0, n)
  int uniform_int(int n) { return std::uniform_int_distribution<int>(0, n - 1)(gen_); }

  bool bernoulli(double p) { return uniform() < p; }

  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(gen_);
  }

  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(gen_);
  }

  detail::Xoshiro256& engine() { return gen_; }

 private:
  std::uint64_t seed_;
  detail::Xoshiro256 gen_;
};

}  // namespace dishpomdp
