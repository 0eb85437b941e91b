#pragma once

#include <vector>

#include "nmfkit/matrix.hpp"

namespace nmfkit {

/// Thin singular value decomposition A = U diag(s) V^T.
///
/// For an m x n input, r = min(m, n): U is m x r, V is n x r, and the
/// singular values are sorted in nonincreasing order. Columns belonging to
/// zero singular values are returned as zero vectors.
struct Svd {
  Dense u;
  std::vector<double> s;
  Dense v;
};

/// One-sided (Hestenes) Jacobi SVD. Throws Error("numeric") if the sweeps do
/// not converge or the input contains non-finite values.
Svd svd_jacobi(const Dense& a, int max_sweeps = 80);

}  // namespace nmfkit
