#include "nmfkit/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nmfkit/error.hpp"

namespace nmfkit {

namespace {

// Orthogonalizes the columns of `work` (m x n, m >= n) in place by plane
// rotations accumulated into `rot` (n x n). On return work = U * diag(s).
void hestenes(Dense& work, Dense& rot, int max_sweeps) {
  const std::size_t m = work.rows();
  const std::size_t n = work.cols();
  constexpr double tol = 1e-15;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0;
        double beta = 0.0;
        double gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = work(i, p);
          const double y = work(i, q);
          alpha += x * x;
          beta += y * y;
          gamma += x * y;
        }
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = work(i, p);
          const double y = work(i, q);
          work(i, p) = c * x - s * y;
          work(i, q) = s * x + c * y;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double x = rot(i, p);
          const double y = rot(i, q);
          rot(i, p) = c * x - s * y;
          rot(i, q) = s * x + c * y;
        }
      }
    }
    if (!rotated) return;
  }
  throw Error("numeric", "Jacobi SVD did not converge");
}

}  // namespace

Svd svd_jacobi(const Dense& a, int max_sweeps) {
  for (double v : a.values())
    if (!std::isfinite(v)) throw Error("numeric", "SVD input contains non-finite values");

  const bool tall = a.rows() >= a.cols();
  Dense work = tall ? a : transpose(a);
  const std::size_t m = work.rows();
  const std::size_t n = work.cols();
  Dense rot = Dense::identity(n);
  hestenes(work, rot, max_sweeps);

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += work(i, j) * work(i, j);
    norms[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  const double smax = n ? norms[order[0]] : 0.0;
  const double cutoff = smax * static_cast<double>(std::max(m, n)) * kEps;

  Dense left(m, n);
  Dense right(n, n);
  std::vector<double> sv(n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t j = order[c];
    const double sigma = norms[j];
    if (sigma > cutoff && sigma > 0.0) {
      sv[c] = sigma;
      for (std::size_t i = 0; i < m; ++i) left(i, c) = work(i, j) / sigma;
      for (std::size_t i = 0; i < n; ++i) right(i, c) = rot(i, j);
    } else {
      sv[c] = 0.0;
    }
  }
  if (tall) return {std::move(left), std::move(sv), std::move(right)};
  return {std::move(right), std::move(sv), std::move(left)};
}

}  // namespace nmfkit
