#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "mmvib/core/types.hpp"

namespace mmvib {

/// Seed splitting: one master seed expands into independent substreams keyed
/// by a stage name and an index. The rule is splitmix64(master ^ fnv1a(name)
/// ^ splitmix64(index)), so a stage can be re-run in isolation.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0);

/// SplitMix64 bit generator: free to seed, which matters because the
/// simulator opens one stream per chirp.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return boost::random::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) { return mean + stddev * unit_(engine_); }
  /// Circularly-symmetric complex Gaussian with E|z|^2 = stddev^2.
  cplx complex_normal(double stddev) {
    const double s = stddev * (0.5 * std::numbers::sqrt2);
    const double re = unit_(engine_);
    const double im = unit_(engine_);
    return {s * re, s * im};
  }
  std::uint64_t next() { return engine_(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform(0.0, static_cast<double>(n))) % n; }
  SplitMix64& engine() { return engine_; }

 private:
  SplitMix64 engine_;
  boost::random::normal_distribution<double> unit_{0.0, 1.0};
};

}  // namespace mmvib
