#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace nmfkit {

/// Seeded random source with a platform-stable output stream.
///
/// Raw bits come from std::mt19937_64, whose sequence is fixed by the C++
/// standard. Every conversion to reals or integers is done here rather than
/// through <random> distributions, which are implementation-defined.
class RngStream {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1); never returns 0.
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), unbiased (rejection sampling). n > 0.
  std::size_t below(std::size_t n);
  /// Standard normal via inverse CDF.
  double normal();
  /// Gamma(shape, 1), Marsaglia-Tsang. shape > 0.
  double gamma(double shape);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Deterministic child seed for (master, a, b). Distinct tuples give
/// unrelated streams; the mapping never depends on scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// Standard normal CDF.
double normal_cdf(double x);
/// Upper tail 1 - CDF, accurate far into the tail.
double normal_sf(double x);
/// Inverse of the standard normal CDF on (0, 1).
double normal_quantile(double p);

}  // namespace nmfkit
