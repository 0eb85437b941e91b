#include "nmfkit/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nmfkit/error.hpp"

namespace nmfkit {

namespace {

std::string dims(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

void require_same_shape(const Dense& a, const Dense& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error("shape", std::string(op) + ": " + dims(a.rows(), a.cols()) +
                             " vs " + dims(b.rows(), b.cols()));
}

void require_inner(std::size_t a_cols, std::size_t b_rows) {
  if (a_cols != b_rows)
    throw Error("shape", "matmul inner dimensions " + std::to_string(a_cols) +
                             " and " + std::to_string(b_rows) + " disagree");
}

// Scalar KL term, exact at m == v. Uses log1p so near-equal pairs do not lose
// the quadratic cancellation between v ln(v/m) and m - v.
double kl_term(double v, double m) {
  if (v < 0.0 || !std::isfinite(v)) throw Error("domain", "kl_div: V has a negative or non-finite entry");
  if (v == 0.0) return m;
  if (!(m > 0.0)) throw Error("domain", "kl_div: reconstruction is nonpositive where V > 0");
  return v * std::log1p((v - m) / m) + (m - v);
}

}  // namespace

// ---- Dense -----------------------------------------------------------------

Dense::Dense(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Dense::Dense(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  if (data_.size() != rows * cols)
    throw Error("shape", "dense buffer holds " + std::to_string(data_.size()) +
                             " values, expected " + dims(rows, cols));
}

Dense::Dense(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error("shape", "ragged initializer rows");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Dense Dense::identity(std::size_t n) {
  Dense out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

// ---- Csr -------------------------------------------------------------------

Csr::Csr(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
         std::vector<std::size_t> col_idx, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
  if (row_ptr_.size() != rows_ + 1)
    throw Error("shape", "CSR row pointer array must have rows+1 entries");
  if (col_idx_.size() != values_.size())
    throw Error("shape", "CSR column index and value arrays differ in length");
  if (row_ptr_.front() != 0 || row_ptr_.back() != values_.size())
    throw Error("shape", "CSR row pointers must span [0, nnz]");
  for (std::size_t i = 0; i < rows_; ++i) {
    if (row_ptr_[i] > row_ptr_[i + 1])
      throw Error("shape", "CSR row pointers decrease at row " + std::to_string(i));
    for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
      if (col_idx_[p] >= cols_)
        throw Error("shape", "CSR column index out of bounds in row " + std::to_string(i));
      if (p > row_ptr_[i] && col_idx_[p] <= col_idx_[p - 1])
        throw Error("shape", "CSR column indices not strictly increasing in row " +
                                 std::to_string(i));
    }
  }
}

Csr Csr::from_dense(const Dense& m) {
  std::vector<std::size_t> rp{0};
  std::vector<std::size_t> ci;
  std::vector<double> vals;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (m(i, j) != 0.0) {
        ci.push_back(j);
        vals.push_back(m(i, j));
      }
    }
    rp.push_back(vals.size());
  }
  return Csr(m.rows(), m.cols(), std::move(rp), std::move(ci), std::move(vals));
}

Dense Csr::to_dense() const {
  Dense out(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) out(i, col_idx_[p]) = values_[p];
  return out;
}

// ---- DataMatrix ------------------------------------------------------------

std::size_t DataMatrix::rows() const noexcept {
  return std::visit([](const auto& m) { return m.rows(); }, storage_);
}

std::size_t DataMatrix::cols() const noexcept {
  return std::visit([](const auto& m) { return m.cols(); }, storage_);
}

std::size_t DataMatrix::stored() const noexcept {
  if (is_sparse()) return csr().nnz();
  return dense().size();
}

Dense DataMatrix::to_dense() const {
  if (is_sparse()) return csr().to_dense();
  return dense();
}

double DataMatrix::max_value() const {
  double best = is_sparse() && csr().nnz() < rows() * cols() ? 0.0
                                                              : -std::numeric_limits<double>::infinity();
  for_each_stored([&](std::size_t, std::size_t, double v) { best = std::max(best, v); });
  return best;
}

double DataMatrix::sum() const {
  double s = 0.0;
  for_each([&](std::size_t, std::size_t, double v) { s += v; });
  return s;
}

void DataMatrix::require_nonnegative() const {
  for_each_stored([](std::size_t i, std::size_t j, double v) {
    if (!std::isfinite(v) || v < 0.0)
      throw Error("domain", "entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                ") is negative or non-finite");
  });
}

void DataMatrix::require_unit_interval() const {
  for_each_stored([](std::size_t i, std::size_t j, double v) {
    if (!(v >= 0.0 && v <= 1.0))
      throw Error("domain", "entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                ") lies outside [0, 1]");
  });
}

DataMatrix DataMatrix::scaled(double factor) const {
  if (is_sparse()) {
    const Csr& s = csr();
    std::vector<double> vals(s.values().begin(), s.values().end());
    for (double& v : vals) v *= factor;
    return Csr(s.rows(), s.cols(), {s.row_ptr().begin(), s.row_ptr().end()},
               {s.col_idx().begin(), s.col_idx().end()}, std::move(vals));
  }
  return scale(dense(), factor);
}

// ---- products --------------------------------------------------------------

Dense matmul(const Dense& a, const Dense& b) {
  require_inner(a.cols(), b.rows());
  Dense c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      const auto brow = b.row(p);
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

Dense matmul(const Csr& a, const Dense& b) {
  require_inner(a.cols(), b.rows());
  Dense c(a.rows(), b.cols());
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto vals = a.values();
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t q = rp[i]; q < rp[i + 1]; ++q) {
      const double aip = vals[q];
      const auto brow = b.row(ci[q]);
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

Dense matmul(const Dense& a, const Csr& b) {
  require_inner(a.cols(), b.rows());
  Dense c(a.rows(), b.cols());
  const auto rp = b.row_ptr();
  const auto ci = b.col_idx();
  const auto vals = b.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double aip = a(i, p);
      for (std::size_t q = rp[p]; q < rp[p + 1]; ++q) crow[ci[q]] += aip * vals[q];
    }
  }
  return c;
}

Dense matmul(const DataMatrix& a, const Dense& b) {
  return a.is_sparse() ? matmul(a.csr(), b) : matmul(a.dense(), b);
}

Dense matmul(const Dense& a, const DataMatrix& b) {
  return b.is_sparse() ? matmul(a, b.csr()) : matmul(a, b.dense());
}

Dense transpose(const Dense& a) {
  Dense t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Csr transpose(const Csr& a) {
  std::vector<std::size_t> rp(a.cols() + 1, 0);
  for (std::size_t c : a.col_idx()) ++rp[c + 1];
  for (std::size_t j = 0; j < a.cols(); ++j) rp[j + 1] += rp[j];
  std::vector<std::size_t> ci(a.nnz());
  std::vector<double> vals(a.nnz());
  std::vector<std::size_t> next(rp.begin(), rp.end() - 1);
  const auto arp = a.row_ptr();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t q = arp[i]; q < arp[i + 1]; ++q) {
      const std::size_t dst = next[a.col_idx()[q]]++;
      ci[dst] = i;
      vals[dst] = a.values()[q];
    }
  }
  return Csr(a.cols(), a.rows(), std::move(rp), std::move(ci), std::move(vals));
}

DataMatrix transpose(const DataMatrix& a) {
  if (a.is_sparse()) return transpose(a.csr());
  return transpose(a.dense());
}

Dense gram(const Dense& a) { return matmul(transpose(a), a); }

Dense outer_gram(const Dense& a) { return matmul(a, transpose(a)); }

// ---- elementwise -----------------------------------------------------------

Dense hadamard(const Dense& a, const Dense& b) {
  require_same_shape(a, b, "hadamard");
  Dense out(a.rows(), a.cols());
  auto o = out.values();
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  return out;
}

Dense safe_divide(const Dense& a, const Dense& b, double eps) {
  require_same_shape(a, b, "safe_divide");
  Dense out(a.rows(), a.cols());
  auto o = out.values();
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] / (y[i] + eps);
  return out;
}

DataMatrix safe_divide(const DataMatrix& v, const Dense& m, double eps) {
  if (v.rows() != m.rows() || v.cols() != m.cols())
    throw Error("shape", "safe_divide: " + dims(v.rows(), v.cols()) + " vs " +
                             dims(m.rows(), m.cols()));
  if (!v.is_sparse()) return safe_divide(v.dense(), m, eps);
  const Csr& s = v.csr();
  std::vector<double> vals(s.nnz());
  const auto rp = s.row_ptr();
  const auto ci = s.col_idx();
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t q = rp[i]; q < rp[i + 1]; ++q) vals[q] = s.values()[q] / (m(i, ci[q]) + eps);
  return Csr(s.rows(), s.cols(), {rp.begin(), rp.end()}, {ci.begin(), ci.end()}, std::move(vals));
}

Dense add(const Dense& a, const Dense& b) {
  require_same_shape(a, b, "add");
  Dense out = a;
  auto o = out.values();
  auto y = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += y[i];
  return out;
}

Dense subtract(const Dense& a, const Dense& b) {
  require_same_shape(a, b, "subtract");
  Dense out = a;
  auto o = out.values();
  auto y = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= y[i];
  return out;
}

Dense scale(const Dense& a, double factor) {
  Dense out = a;
  for (double& v : out.values()) v *= factor;
  return out;
}

Dense ones(std::size_t rows, std::size_t cols) { return Dense(rows, cols, 1.0); }

std::vector<double> row_sums(const Dense& a) {
  std::vector<double> s(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (double v : a.row(i)) s[i] += v;
  return s;
}

std::vector<double> col_sums(const Dense& a) {
  std::vector<double> s(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s[j] += r[j];
  }
  return s;
}

// ---- reductions ------------------------------------------------------------

double frobenius_sq(const Dense& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return s;
}

double frobenius_sq(const DataMatrix& a) {
  double s = 0.0;
  a.for_each([&](std::size_t, std::size_t, double v) { s += v * v; });
  return s;
}

double residual_sq(const DataMatrix& v, const Dense& m) {
  if (v.rows() != m.rows() || v.cols() != m.cols())
    throw Error("shape", "residual: " + dims(v.rows(), v.cols()) + " vs " +
                             dims(m.rows(), m.cols()));
  double s = 0.0;
  v.for_each([&](std::size_t i, std::size_t j, double x) {
    const double d = x - m(i, j);
    s += d * d;
  });
  return s;
}

double kl_div(const Dense& v, const Dense& m) {
  require_same_shape(v, m, "kl_div");
  double s = 0.0;
  auto x = v.values();
  auto y = m.values();
  for (std::size_t i = 0; i < x.size(); ++i) s += kl_term(x[i], y[i]);
  return s;
}

double kl_div(const DataMatrix& v, const Dense& m) {
  if (v.rows() != m.rows() || v.cols() != m.cols())
    throw Error("shape", "kl_div: " + dims(v.rows(), v.cols()) + " vs " +
                             dims(m.rows(), m.cols()));
  double s = 0.0;
  v.for_each([&](std::size_t i, std::size_t j, double x) { s += kl_term(x, m(i, j)); });
  return s;
}

double dot(const Dense& a, const Dense& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

bool all_finite_nonnegative(const Dense& a) noexcept {
  for (double v : a.values())
    if (!std::isfinite(v) || v < 0.0) return false;
  return true;
}

}  // namespace nmfkit
