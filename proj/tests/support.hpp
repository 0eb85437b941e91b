#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "nmfkit/error.hpp"
#include "nmfkit/matrix.hpp"
#include "nmfkit/rng.hpp"

namespace testing {

using nmfkit::Dense;

inline Dense random_dense(std::size_t m, std::size_t n, nmfkit::RngStream& rng, double lo = 0.0,
                          double hi = 1.0) {
  Dense d(m, n);
  for (double& x : d.values()) x = rng.uniform(lo, hi);
  return d;
}

// Nonnegative matrix where each entry is kept with probability `density`.
inline Dense random_sparse(std::size_t m, std::size_t n, double density, nmfkit::RngStream& rng) {
  Dense d(m, n);
  for (double& x : d.values())
    if (rng.uniform() < density) x = rng.uniform(0.05, 1.0);
  return d;
}

// Kind of the nmfkit::Error raised by f, or "none".
template <typename F>
std::string error_kind(F&& f) {
  try {
    f();
  } catch (const nmfkit::Error& e) {
    return e.kind();
  }
  return "none";
}

inline Dense naive_matmul(const Dense& a, const Dense& b) {
  Dense c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

inline double max_abs_diff(const Dense& a, const Dense& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace testing
