#include "nmfkit/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nmfkit/error.hpp"
#include "nmfkit/svd.hpp"

namespace nmfkit {

namespace {

void require_rank(std::size_t m, std::size_t n, std::size_t k) {
  if (k < 1 || k > std::min(m, n))
    throw Error("rank", "rank " + std::to_string(k) + " outside [1, " +
                            std::to_string(std::min(m, n)) + "]");
}

std::size_t ceil_fifth(std::size_t x) { return (x + 4) / 5; }

// p distinct indices drawn uniformly from pool, returned sorted ascending.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t p,
                                                    RngStream& rng) {
  for (std::size_t t = 0; t < p; ++t) {
    const std::size_t j = t + rng.below(pool.size() - t);
    std::swap(pool[t], pool[j]);
  }
  pool.resize(p);
  std::sort(pool.begin(), pool.end());
  return pool;
}

// W(:, a) = mean of p_cols sampled columns of v, for every a.
Dense column_means_basis(const Dense& v, std::size_t k, const std::vector<std::size_t>& pool,
                         std::size_t p_cols, RngStream& rng) {
  Dense w(v.rows(), k);
  for (std::size_t a = 0; a < k; ++a) {
    const auto picked = sample_without_replacement(pool, p_cols, rng);
    for (std::size_t i = 0; i < v.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j : picked) s += v(i, j);
      w(i, a) = s / static_cast<double>(p_cols);
    }
  }
  return w;
}

std::vector<std::size_t> iota_vec(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

Dense uniform_matrix(std::size_t r, std::size_t c, double scale, RngStream& rng) {
  Dense out(r, c);
  for (double& x : out.values()) x = scale * rng.uniform();
  return out;
}

}  // namespace

SeedSpec SeedSpec::parse(std::string_view name) {
  SeedSpec s;
  if (name == "random") {
    s.kind = SeedKind::random;
  } else if (name == "fixed") {
    s.kind = SeedKind::fixed;
  } else if (name == "random_c") {
    s.kind = SeedKind::random_c;
  } else if (name == "random_vcol") {
    s.kind = SeedKind::random_vcol;
  } else if (name == "nndsvd") {
    s.kind = SeedKind::nndsvd;
  } else if (name == "nndsvda") {
    s.kind = SeedKind::nndsvd;
    s.variant = NndsvdVariant::a;
  } else if (name == "nndsvdar") {
    s.kind = SeedKind::nndsvd;
    s.variant = NndsvdVariant::ar;
  } else {
    throw Error("seed", "unknown seeding method '" + std::string(name) + "'");
  }
  return s;
}

std::string SeedSpec::name() const {
  switch (kind) {
    case SeedKind::random: return "random";
    case SeedKind::fixed: return "fixed";
    case SeedKind::random_c: return "random_c";
    case SeedKind::random_vcol: return "random_vcol";
    case SeedKind::nndsvd:
      switch (variant) {
        case NndsvdVariant::none: return "nndsvd";
        case NndsvdVariant::a: return "nndsvda";
        case NndsvdVariant::ar: return "nndsvdar";
      }
  }
  return "unknown";
}

FactorPair seed_random(std::size_t m, std::size_t n, std::size_t k, RngStream& rng,
                       double scale) {
  require_rank(m, n, k);
  if (!(scale > 0.0) || !std::isfinite(scale)) throw Error("param", "random seed scale must be positive");
  Dense w = uniform_matrix(m, k, scale, rng);
  Dense h = uniform_matrix(k, n, scale, rng);
  return {std::move(w), std::move(h)};
}

FactorPair seed_random_vcol(const DataMatrix& v, std::size_t k, std::size_t p_cols,
                            std::size_t p_rows, RngStream& rng) {
  const std::size_t m = v.rows();
  const std::size_t n = v.cols();
  require_rank(m, n, k);
  if (p_cols < 1 || p_cols > n)
    throw Error("param", "p_cols " + std::to_string(p_cols) + " outside [1, " + std::to_string(n) + "]");
  if (p_rows < 1 || p_rows > m)
    throw Error("param", "p_rows " + std::to_string(p_rows) + " outside [1, " + std::to_string(m) + "]");
  const Dense dv = v.to_dense();
  Dense w = column_means_basis(dv, k, iota_vec(n), p_cols, rng);

  Dense h(k, n);
  const auto rows = iota_vec(m);
  for (std::size_t a = 0; a < k; ++a) {
    const auto picked = sample_without_replacement(rows, p_rows, rng);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i : picked) s += dv(i, j);
      h(a, j) = s / static_cast<double>(p_rows);
    }
  }
  return {std::move(w), std::move(h)};
}

FactorPair seed_random_vcol(const DataMatrix& v, std::size_t k, RngStream& rng) {
  return seed_random_vcol(v, k, ceil_fifth(v.cols()), ceil_fifth(v.rows()), rng);
}

FactorPair seed_random_c(const DataMatrix& v, std::size_t k, std::size_t p_cols,
                         double dense_fraction, RngStream& rng) {
  const std::size_t m = v.rows();
  const std::size_t n = v.cols();
  require_rank(m, n, k);
  if (!(dense_fraction > 0.0 && dense_fraction <= 1.0))
    throw Error("param", "dense_fraction must lie in (0, 1]");
  const auto pool_size = static_cast<std::size_t>(std::ceil(dense_fraction * static_cast<double>(n) - 1e-9));
  if (p_cols < 1 || p_cols > pool_size)
    throw Error("param", "p_cols " + std::to_string(p_cols) + " exceeds the dense pool of " +
                             std::to_string(pool_size) + " columns");
  const Dense dv = v.to_dense();

  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) norms[j] += dv(i, j) * dv(i, j);
  // Largest norms first; equal norms keep ascending column order.
  auto order = iota_vec(n);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });
  order.resize(pool_size);
  std::sort(order.begin(), order.end());

  Dense w = column_means_basis(dv, k, order, p_cols, rng);
  Dense h = uniform_matrix(k, n, 1.0, rng);
  return {std::move(w), std::move(h)};
}

FactorPair seed_nndsvd(const DataMatrix& v, std::size_t k, NndsvdVariant variant,
                       RngStream& rng) {
  const std::size_t m = v.rows();
  const std::size_t n = v.cols();
  require_rank(m, n, k);
  v.require_nonnegative();
  const Dense dv = v.to_dense();
  const Svd svd = svd_jacobi(dv);

  Dense w(m, k);
  Dense h(k, n);

  const double s0 = std::sqrt(svd.s[0]);
  for (std::size_t i = 0; i < m; ++i) w(i, 0) = s0 * std::abs(svd.u(i, 0));
  for (std::size_t j = 0; j < n; ++j) h(0, j) = s0 * std::abs(svd.v(j, 0));

  std::vector<double> up(m), un(m), vp(n), vn(n);
  auto norm = [](const std::vector<double>& x) {
    double s = 0.0;
    for (double e : x) s += e * e;
    return std::sqrt(s);
  };
  for (std::size_t c = 1; c < k; ++c) {
    for (std::size_t i = 0; i < m; ++i) {
      const double x = svd.u(i, c);
      up[i] = std::max(x, 0.0);
      un[i] = std::max(-x, 0.0);
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double y = svd.v(j, c);
      vp[j] = std::max(y, 0.0);
      vn[j] = std::max(-y, 0.0);
    }
    const double nup = norm(up), nun = norm(un), nvp = norm(vp), nvn = norm(vn);
    const double mu_pos = nup * nvp;
    const double mu_neg = nun * nvn;
    const bool positive = mu_pos >= mu_neg;
    const double mu = positive ? mu_pos : mu_neg;
    if (!(mu > 0.0) || svd.s[c] == 0.0) continue;  // column stays zero
    const auto& uu = positive ? up : un;
    const auto& vv = positive ? vp : vn;
    const double nu = positive ? nup : nun;
    const double nvv = positive ? nvp : nvn;
    const double factor = std::sqrt(svd.s[c] * mu);
    for (std::size_t i = 0; i < m; ++i) w(i, c) = factor * uu[i] / nu;
    for (std::size_t j = 0; j < n; ++j) h(c, j) = factor * vv[j] / nvv;
  }

  if (variant != NndsvdVariant::none) {
    const double mean = v.sum() / static_cast<double>(m * n);
    auto fill = [&](Dense& f) {
      for (double& x : f.values()) {
        if (x != 0.0) continue;
        x = variant == NndsvdVariant::a ? mean : rng.uniform(0.0, mean / 100.0);
      }
    };
    fill(w);
    fill(h);
  }
  return {std::move(w), std::move(h)};
}

FactorPair seed_fixed(const Dense& w0, const Dense& h0, std::size_t m, std::size_t n,
                      std::size_t k) {
  if (w0.rows() != m || w0.cols() != k)
    throw Error("seed", "fixed W must be " + std::to_string(m) + "x" + std::to_string(k));
  if (h0.rows() != k || h0.cols() != n)
    throw Error("seed", "fixed H must be " + std::to_string(k) + "x" + std::to_string(n));
  if (!all_finite_nonnegative(w0) || !all_finite_nonnegative(h0))
    throw Error("seed", "fixed factors must be finite and nonnegative");
  return {w0, h0};
}

FactorPair seed(const DataMatrix& v, std::size_t k, const SeedSpec& spec, RngStream& rng) {
  const std::size_t m = v.rows();
  const std::size_t n = v.cols();
  switch (spec.kind) {
    case SeedKind::random:
      return seed_random(m, n, k, rng, spec.scale);
    case SeedKind::fixed:
      require_rank(m, n, k);
      if (!spec.fixed_w || !spec.fixed_h) throw Error("seed", "fixed seeding needs both W0 and H0");
      return seed_fixed(*spec.fixed_w, *spec.fixed_h, m, n, k);
    case SeedKind::random_c:
      return seed_random_c(v, k, spec.p_cols.value_or(ceil_fifth(n)), spec.dense_fraction, rng);
    case SeedKind::random_vcol:
      return seed_random_vcol(v, k, spec.p_cols.value_or(ceil_fifth(n)),
                              spec.p_rows.value_or(ceil_fifth(m)), rng);
    case SeedKind::nndsvd:
      return seed_nndsvd(v, k, spec.variant, rng);
  }
  throw Error("seed", "unhandled seeding kind");
}

}  // namespace nmfkit
