#pragma once

// Dense and CSR matrix kernels shared by every factorization method.
//
// Factors are always dense; the data matrix V may be dense or CSR. All
// products accumulate over the inner index in increasing order regardless of
// storage, so a CSR operand and its densified copy give bitwise-identical
// results (skipped terms are exact zeros).

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <variant>
#include <vector>

namespace nmfkit {

/// Denominator stabilizer for multiplicative updates (2^-52).
inline constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Row-major dense matrix of doubles.
class Dense {
 public:
  Dense() = default;
  Dense(std::size_t rows, std::size_t cols, double fill = 0.0);
  Dense(std::size_t rows, std::size_t cols, std::vector<double> row_major);
  Dense(std::initializer_list<std::initializer_list<double>> rows);

  static Dense identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[i * cols_ + j];
  }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  bool operator==(const Dense&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Compressed sparse row matrix. Construction validates structure.
class Csr {
 public:
  Csr() = default;
  /// Throws Error("shape") on any structural violation: row pointers must
  /// start at 0, be nondecreasing and end at nnz; column indices must be
  /// strictly increasing within a row and lie in [0, cols).
  Csr(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
      std::vector<std::size_t> col_idx, std::vector<double> values);

  /// Stores every nonzero of `m` (exact zeros are dropped).
  static Csr from_dense(const Dense& m);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  Dense to_dense() const;

  bool operator==(const Csr&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

/// The input matrix V: dense or CSR storage behind one interface.
class DataMatrix {
 public:
  DataMatrix() = default;
  DataMatrix(Dense m) : storage_(std::move(m)) {}  // NOLINT(implicit)
  DataMatrix(Csr m) : storage_(std::move(m)) {}    // NOLINT(implicit)

  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;
  bool is_sparse() const noexcept { return std::holds_alternative<Csr>(storage_); }

  const Dense& dense() const { return std::get<Dense>(storage_); }
  const Csr& csr() const { return std::get<Csr>(storage_); }
  Dense to_dense() const;

  /// Number of explicitly stored values (rows*cols for dense).
  std::size_t stored() const noexcept;
  double max_value() const;
  double sum() const;

  /// Throws Error("domain") unless every stored value is finite and >= 0.
  void require_nonnegative() const;
  /// Throws Error("domain") unless every value lies in [0, 1].
  void require_unit_interval() const;

  /// Visits every (i, j, value) of the full matrix in row-major order,
  /// supplying 0 for entries a CSR matrix does not store.
  template <typename F>
  void for_each(F&& f) const;

  /// Visits stored entries only, row-major.
  template <typename F>
  void for_each_stored(F&& f) const;

  DataMatrix scaled(double factor) const;

 private:
  std::variant<Dense, Csr> storage_;
};

// ---- products --------------------------------------------------------------

Dense matmul(const Dense& a, const Dense& b);
Dense matmul(const Csr& a, const Dense& b);
Dense matmul(const Dense& a, const Csr& b);
Dense matmul(const DataMatrix& a, const Dense& b);
Dense matmul(const Dense& a, const DataMatrix& b);

Dense transpose(const Dense& a);
Csr transpose(const Csr& a);
DataMatrix transpose(const DataMatrix& a);

/// a^T * a
Dense gram(const Dense& a);
/// a * a^T
Dense outer_gram(const Dense& a);

// ---- elementwise -----------------------------------------------------------

Dense hadamard(const Dense& a, const Dense& b);
/// a / (b + eps) elementwise.
Dense safe_divide(const Dense& a, const Dense& b, double eps = kEps);
/// v / (m + eps) over the stored pattern of v; result has v's storage kind.
DataMatrix safe_divide(const DataMatrix& v, const Dense& m, double eps = kEps);

Dense add(const Dense& a, const Dense& b);
Dense subtract(const Dense& a, const Dense& b);
Dense scale(const Dense& a, double factor);
Dense ones(std::size_t rows, std::size_t cols);
std::vector<double> row_sums(const Dense& a);
std::vector<double> col_sums(const Dense& a);

// ---- reductions ------------------------------------------------------------

double frobenius_sq(const Dense& a);
double frobenius_sq(const DataMatrix& a);
/// sum_ij (v_ij - m_ij)^2
double residual_sq(const DataMatrix& v, const Dense& m);
/// Generalized KL divergence sum v ln(v/m) - v + m with 0 ln 0 = 0.
/// Throws Error("domain") where m <= 0 and v > 0, or v < 0.
double kl_div(const Dense& v, const Dense& m);
double kl_div(const DataMatrix& v, const Dense& m);
/// Frobenius inner product <a, b>.
double dot(const Dense& a, const Dense& b);

bool all_finite_nonnegative(const Dense& a) noexcept;

// ---- template definitions --------------------------------------------------

template <typename F>
void DataMatrix::for_each(F&& f) const {
  if (const auto* d = std::get_if<Dense>(&storage_)) {
    for (std::size_t i = 0; i < d->rows(); ++i)
      for (std::size_t j = 0; j < d->cols(); ++j) f(i, j, (*d)(i, j));
    return;
  }
  const Csr& s = std::get<Csr>(storage_);
  const auto rp = s.row_ptr();
  const auto ci = s.col_idx();
  const auto vals = s.values();
  for (std::size_t i = 0; i < s.rows(); ++i) {
    std::size_t p = rp[i];
    for (std::size_t j = 0; j < s.cols(); ++j) {
      if (p < rp[i + 1] && ci[p] == j) {
        f(i, j, vals[p]);
        ++p;
      } else {
        f(i, j, 0.0);
      }
    }
  }
}

template <typename F>
void DataMatrix::for_each_stored(F&& f) const {
  if (const auto* d = std::get_if<Dense>(&storage_)) {
    for (std::size_t i = 0; i < d->rows(); ++i)
      for (std::size_t j = 0; j < d->cols(); ++j) f(i, j, (*d)(i, j));
    return;
  }
  const Csr& s = std::get<Csr>(storage_);
  const auto rp = s.row_ptr();
  const auto ci = s.col_idx();
  const auto vals = s.values();
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) f(i, ci[p], vals[p]);
}

}  // namespace nmfkit
