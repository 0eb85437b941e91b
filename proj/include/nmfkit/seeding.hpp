#pragma once

// Initial (W, H) construction ahead of iterative optimization.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "nmfkit/matrix.hpp"
#include "nmfkit/rng.hpp"

namespace nmfkit {

enum class SeedKind { random, fixed, random_c, random_vcol, nndsvd };
enum class NndsvdVariant { none, a, ar };

struct FactorPair {
  Dense w;  // m x k basis
  Dense h;  // k x n mixture
};

struct SeedSpec {
  SeedKind kind = SeedKind::random_vcol;
  NndsvdVariant variant = NndsvdVariant::none;
  std::optional<std::size_t> p_cols;  // default ceil(n/5)
  std::optional<std::size_t> p_rows;  // default ceil(m/5)
  double dense_fraction = 0.2;
  double scale = 1.0;  // upper end of the uniform range for `random`
  std::optional<Dense> fixed_w;
  std::optional<Dense> fixed_h;

  /// Parses a CLI seeding identifier: random, fixed, random_c, random_vcol,
  /// nndsvd, nndsvda, nndsvdar. Throws Error("seed") otherwise.
  static SeedSpec parse(std::string_view name);
  /// Inverse of parse().
  std::string name() const;
};

FactorPair seed_random(std::size_t m, std::size_t n, std::size_t k, RngStream& rng,
                       double scale = 1.0);

FactorPair seed_random_vcol(const DataMatrix& v, std::size_t k, std::size_t p_cols,
                            std::size_t p_rows, RngStream& rng);
FactorPair seed_random_vcol(const DataMatrix& v, std::size_t k, RngStream& rng);

FactorPair seed_random_c(const DataMatrix& v, std::size_t k, std::size_t p_cols,
                         double dense_fraction, RngStream& rng);

FactorPair seed_nndsvd(const DataMatrix& v, std::size_t k, NndsvdVariant variant,
                       RngStream& rng);

FactorPair seed_fixed(const Dense& w0, const Dense& h0, std::size_t m, std::size_t n,
                      std::size_t k);

/// Dispatches on spec.kind.
FactorPair seed(const DataMatrix& v, std::size_t k, const SeedSpec& spec, RngStream& rng);

}  // namespace nmfkit
