// Multiplicative (Euclidean, KL, nsNMF, binary) and Bayesian update rules.

#include <algorithm>
#include <cmath>

#include "nmfkit/error.hpp"
#include "nmfkit/factor.hpp"

namespace nmfkit {

namespace {

void require_conforming(const DataMatrix& v, const Dense& w, const Dense& h) {
  if (w.rows() != v.rows() || h.cols() != v.cols() || w.cols() != h.rows())
    throw Error("shape", "factors do not conform to V");
}

// x * num / (den + eps), elementwise.
Dense mult_update(const Dense& x, const Dense& num, const Dense& den) {
  Dense out = x;
  auto o = out.values();
  auto a = num.values();
  auto b = den.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = o[i] * a[i] / (b[i] + kEps);
  return out;
}

// KL update of the mixture for a fixed basis.
Dense kl_update_h(const DataMatrix& v, const Dense& basis, const Dense& h) {
  const DataMatrix ratio = safe_divide(v, matmul(basis, h));
  const Dense num = matmul(transpose(basis), ratio);
  const std::vector<double> den = col_sums(basis);
  Dense out = h;
  for (std::size_t a = 0; a < h.rows(); ++a)
    for (std::size_t j = 0; j < h.cols(); ++j) out(a, j) = h(a, j) * num(a, j) / (den[a] + kEps);
  return out;
}

// KL update of the basis for a fixed mixture.
Dense kl_update_w(const DataMatrix& v, const Dense& w, const Dense& mixture) {
  const DataMatrix ratio = safe_divide(v, matmul(w, mixture));
  const Dense num = matmul(ratio, transpose(mixture));
  const std::vector<double> den = row_sums(mixture);
  Dense out = w;
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t a = 0; a < w.cols(); ++a) out(i, a) = w(i, a) * num(i, a) / (den[a] + kEps);
  return out;
}

}  // namespace

FactorPair mu_eu_step(const DataMatrix& v, const Dense& w, const Dense& h) {
  require_conforming(v, w, h);
  const Dense wt = transpose(w);
  Dense h1 = mult_update(h, matmul(wt, v), matmul(gram(w), h));
  Dense w1 = mult_update(w, matmul(v, transpose(h1)), matmul(w, outer_gram(h1)));
  return {std::move(w1), std::move(h1)};
}

FactorPair mu_kl_step(const DataMatrix& v, const Dense& w, const Dense& h) {
  require_conforming(v, w, h);
  Dense h1 = kl_update_h(v, w, h);
  Dense w1 = kl_update_w(v, w, h1);
  return {std::move(w1), std::move(h1)};
}

Dense nsnmf_smoothing(double theta, std::size_t k) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw Error("param", "theta must lie in [0, 1]");
  if (k < 1) throw Error("param", "smoothing matrix needs k >= 1");
  Dense s(k, k, theta / static_cast<double>(k));
  for (std::size_t i = 0; i < k; ++i) s(i, i) += 1.0 - theta;
  return s;
}

FactorPair nsnmf_step(const DataMatrix& v, const Dense& w, const Dense& h, double theta) {
  require_conforming(v, w, h);
  const Dense s = nsnmf_smoothing(theta, w.cols());
  Dense h1 = kl_update_h(v, matmul(w, s), h);
  Dense w1 = kl_update_w(v, w, matmul(s, h1));
  return {std::move(w1), std::move(h1)};
}

FactorPair bmf_step(const DataMatrix& v, const Dense& w, const Dense& h, double lambda) {
  require_conforming(v, w, h);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("param", "lambda must be finite and >= 0");

  // Numerator gains 3 lambda X^2, denominator 2 lambda X^3 + lambda X.
  auto penalize = [lambda](const Dense& x, Dense& num, Dense& den) {
    auto xv = x.values();
    auto nv = num.values();
    auto dv = den.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double t = xv[i];
      nv[i] += 3.0 * lambda * t * t;
      dv[i] += 2.0 * lambda * t * t * t + lambda * t;
    }
  };

  Dense num_h = matmul(transpose(w), v);
  Dense den_h = matmul(gram(w), h);
  penalize(h, num_h, den_h);
  Dense h1 = mult_update(h, num_h, den_h);

  Dense num_w = matmul(v, transpose(h1));
  Dense den_w = matmul(w, outer_gram(h1));
  penalize(w, num_w, den_w);
  Dense w1 = mult_update(w, num_w, den_w);
  return {std::move(w1), std::move(h1)};
}

double bmf_lambda(const ParamSet& p, std::size_t iter) {
  const std::size_t period = p.lambda_period ? p.lambda_period : 1;
  const std::size_t steps = iter ? (iter - 1) / period : 0;
  double lambda = p.lambda0;
  for (std::size_t i = 0; i < steps && lambda < p.lambda_max; ++i) lambda *= p.lambda_growth;
  return std::min(lambda, p.lambda_max);
}

// ---- Bayesian --------------------------------------------------------------

double sample_rectified_normal(double mu, double var, RngStream& rng) {
  if (!(var > 0.0) || !std::isfinite(var) || !std::isfinite(mu))
    throw Error("param", "rectified normal needs finite mu and var > 0");
  const double sd = std::sqrt(var);
  const double lower = -mu / sd;  // truncation point in standard units
  const double tail = normal_sf(lower);
  const double u = rng.uniform_open();
  double z;
  if (tail > 0.0) {
    z = -normal_quantile(u * tail);
  } else {
    // Tail mass underflows: exponential approximation beyond `lower`.
    z = lower - std::log(u) / lower;
  }
  return std::max(0.0, mu + sd * z);
}

namespace {

enum class Draw { sample, mode };

BayesState bayes_sweep(const DataMatrix& v, Dense w, Dense h, double sigma2,
                       const BayesPriors& pr, RngStream* rng, Draw draw) {
  require_conforming(v, w, h);
  const std::size_t m = w.rows();
  const std::size_t k = w.cols();
  const std::size_t n = h.cols();

  auto pick = [&](double mean, double var) {
    if (draw == Draw::mode) return std::max(0.0, mean);
    return sample_rectified_normal(mean, var, *rng);
  };

  {
    const Dense c = outer_gram(h);               // k x k
    const Dense d = matmul(v, transpose(h));     // m x k
    for (std::size_t a = 0; a < k; ++a) {
      const double caa = c(a, a);
      if (!(caa > 0.0)) continue;
      const double var = sigma2 / caa;
      for (std::size_t i = 0; i < m; ++i) {
        double wc = 0.0;
        for (std::size_t b = 0; b < k; ++b) wc += w(i, b) * c(b, a);
        const double mean = (d(i, a) - wc + w(i, a) * caa - sigma2 * pr.alpha_rate) / caa;
        w(i, a) = pick(mean, var);
      }
    }
  }
  {
    const Dense e = gram(w);                     // k x k
    const Dense f = matmul(transpose(w), v);     // k x n
    for (std::size_t a = 0; a < k; ++a) {
      const double eaa = e(a, a);
      if (!(eaa > 0.0)) continue;
      const double var = sigma2 / eaa;
      for (std::size_t j = 0; j < n; ++j) {
        double eh = 0.0;
        for (std::size_t b = 0; b < k; ++b) eh += e(a, b) * h(b, j);
        const double mean = (f(a, j) - eh + eaa * h(a, j) - sigma2 * pr.beta_rate) / eaa;
        h(a, j) = pick(mean, var);
      }
    }
  }

  const double half_resid = 0.5 * residual_sq(v, matmul(w, h)) + pr.sigma_scale;
  const double half_mn = 0.5 * static_cast<double>(v.rows() * v.cols());
  double s2;
  if (draw == Draw::mode) {
    s2 = half_resid / (half_mn + pr.sigma_shape + 1.0);
  } else {
    s2 = half_resid / rng->gamma(half_mn + 1.0 + pr.sigma_shape);
  }
  s2 = std::max(s2, kSigmaFloor);
  return {std::move(w), std::move(h), s2};
}

}  // namespace

BayesState bd_gibbs_step(const DataMatrix& v, const Dense& w, const Dense& h, double sigma2,
                         const BayesPriors& priors, RngStream& rng) {
  return bayes_sweep(v, w, h, sigma2, priors, &rng, Draw::sample);
}

BayesState icm_step(const DataMatrix& v, const Dense& w, const Dense& h, double sigma2,
                    const BayesPriors& priors) {
  return bayes_sweep(v, w, h, sigma2, priors, nullptr, Draw::mode);
}

}  // namespace nmfkit
