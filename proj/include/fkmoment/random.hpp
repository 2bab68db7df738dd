#pragma once

#include <cstdint>
#include <random>

namespace fkmoment {

namespace detail {

// SplitMix64 finalizer, used only to decorrelate (seed, index) pairs.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Seeded random stream. Each Monte Carlo replicate owns one stream derived
/// from (seed, replicate index), so results never depend on scheduling.
class Stream {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  static Stream substream(std::uint64_t seed, std::uint64_t index) {
    return Stream(detail::mix64(detail::mix64(seed) ^ detail::mix64(index + 0x632be59bd9b4e019ULL)));
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

  double normal() { return normal_(engine_); }

  unsigned poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<unsigned>(mean)(engine_);
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace fkmoment
