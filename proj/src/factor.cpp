#include "nmfkit/factor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "nmfkit/error.hpp"

namespace nmfkit {

namespace {

constexpr std::array<std::pair<std::string_view, Method>, 9> kMethods{{
    {"nmf-eu", Method::nmf_eu},
    {"nmf-kl", Method::nmf_kl},
    {"lsnmf", Method::lsnmf},
    {"snmf-l", Method::snmf_l},
    {"snmf-r", Method::snmf_r},
    {"nsnmf", Method::nsnmf},
    {"bmf", Method::bmf},
    {"bd", Method::bd},
    {"icm", Method::icm},
}};

// Seed-stream tags mixed with master_seed.
constexpr std::uint64_t kSeedingStream = 0x5eed;
constexpr std::uint64_t kSamplerStream = 0x6bb5;

std::size_t as_count(std::string_view key, double value) {
  if (!(value >= 0.0) || value != std::floor(value) || value > 1e15)
    throw Error("param", std::string(key) + " must be a nonnegative integer");
  return static_cast<std::size_t>(value);
}

}  // namespace

Method parse_method(std::string_view name) {
  for (const auto& [label, m] : kMethods)
    if (label == name) return m;
  throw Error("method", "unknown method '" + std::string(name) + "'");
}

std::string_view method_name(Method m) noexcept {
  for (const auto& [label, mm] : kMethods)
    if (mm == m) return label;
  return "unknown";
}

ObjectiveKind objective_kind(Method m) noexcept {
  switch (m) {
    case Method::nmf_kl:
    case Method::nsnmf:
      return ObjectiveKind::kl;
    case Method::snmf_l:
    case Method::snmf_r:
    case Method::bmf:
      return ObjectiveKind::penalized;
    default:
      return ObjectiveKind::euclidean;
  }
}

std::string_view objective_kind_name(ObjectiveKind k) noexcept {
  switch (k) {
    case ObjectiveKind::euclidean: return "euclidean";
    case ObjectiveKind::kl: return "kl";
    case ObjectiveKind::penalized: return "penalized";
  }
  return "unknown";
}

bool is_multiplicative(Method m) noexcept {
  return m == Method::nmf_eu || m == Method::nmf_kl || m == Method::nsnmf || m == Method::bmf;
}

// ---- ParamSet --------------------------------------------------------------

const std::vector<std::string>& ParamSet::keys() {
  static const std::vector<std::string> k{
      "theta",      "eta",        "beta",        "lambda0",     "lambda_growth",
      "lambda_period", "lambda_max", "alpha_rate", "beta_rate", "sigma_shape",
      "sigma_scale", "burn_in",   "pg_tol",      "inner_max_iter", "armijo_beta",
      "armijo_sigma"};
  return k;
}

void ParamSet::set(std::string_view key, double value) {
  if (!std::isfinite(value)) throw Error("param", std::string(key) + " must be finite");
  if (key == "theta") theta = value;
  else if (key == "eta") eta = value;
  else if (key == "beta") beta = value;
  else if (key == "lambda0") lambda0 = value;
  else if (key == "lambda_growth") lambda_growth = value;
  else if (key == "lambda_period") lambda_period = as_count(key, value);
  else if (key == "lambda_max") lambda_max = value;
  else if (key == "alpha_rate") alpha_rate = value;
  else if (key == "beta_rate") beta_rate = value;
  else if (key == "sigma_shape") sigma_shape = value;
  else if (key == "sigma_scale") sigma_scale = value;
  else if (key == "burn_in") burn_in = as_count(key, value);
  else if (key == "pg_tol") pg_tol = value;
  else if (key == "inner_max_iter") inner_max_iter = as_count(key, value);
  else if (key == "armijo_beta") armijo_beta = value;
  else if (key == "armijo_sigma") armijo_sigma = value;
  else throw Error("param", "unknown parameter '" + std::string(key) + "'");
}

void ParamSet::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw Error("param", what);
  };
  need(theta >= 0.0 && theta <= 1.0, "theta must lie in [0, 1]");
  need(!eta || (std::isfinite(*eta) && *eta >= 0.0), "eta must be >= 0");
  need(std::isfinite(beta) && beta >= 0.0, "beta must be >= 0");
  need(std::isfinite(lambda0) && lambda0 > 0.0, "lambda0 must be > 0");
  need(std::isfinite(lambda_growth) && lambda_growth >= 1.0, "lambda_growth must be >= 1");
  need(lambda_period >= 1, "lambda_period must be >= 1");
  need(std::isfinite(lambda_max) && lambda_max >= lambda0, "lambda_max must be >= lambda0");
  need(std::isfinite(alpha_rate) && alpha_rate >= 0.0, "alpha_rate must be >= 0");
  need(std::isfinite(beta_rate) && beta_rate >= 0.0, "beta_rate must be >= 0");
  need(std::isfinite(sigma_shape) && sigma_shape >= 0.0, "sigma_shape must be >= 0");
  need(std::isfinite(sigma_scale) && sigma_scale >= 0.0, "sigma_scale must be >= 0");
  need(std::isfinite(pg_tol) && pg_tol > 0.0, "pg_tol must be > 0");
  need(inner_max_iter >= 1, "inner_max_iter must be >= 1");
  need(armijo_beta > 0.0 && armijo_beta < 1.0, "armijo_beta must lie in (0, 1)");
  need(armijo_sigma > 0.0 && armijo_sigma < 1.0, "armijo_sigma must lie in (0, 1)");
}

void apply_param(FactorConfig& config, std::string_view key, double value) {
  if (key == "p_cols") {
    config.seed.p_cols = as_count(key, value);
  } else if (key == "p_rows") {
    config.seed.p_rows = as_count(key, value);
  } else if (key == "dense_fraction") {
    config.seed.dense_fraction = value;
  } else if (key == "seed_scale") {
    config.seed.scale = value;
  } else {
    config.params.set(key, value);
  }
}

// ---- model & objectives ----------------------------------------------------

Dense FactorModel::reconstruction() const {
  if (method == Method::nsnmf && theta)
    return matmul(matmul(w, nsnmf_smoothing(*theta, w.cols())), h);
  return matmul(w, h);
}

double euclidean_objective(const DataMatrix& v, const Dense& w, const Dense& h) {
  return residual_sq(v, matmul(w, h));
}

double kl_objective(const DataMatrix& v, const Dense& reconstruction) {
  // Where V > 0 a reconstruction below kEps is floored so that zero-locked
  // factors yield a large finite divergence rather than a domain error.
  Dense r = reconstruction;
  if (r.rows() == v.rows() && r.cols() == v.cols()) {
    v.for_each_stored([&](std::size_t i, std::size_t j, double x) {
      if (x > 0.0 && r(i, j) < kEps) r(i, j) = kEps;
    });
  }
  return kl_div(v, r);
}

double objective(const DataMatrix& v, const FactorModel& model, ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::euclidean:
      return residual_sq(v, model.reconstruction());
    case ObjectiveKind::kl:
      return kl_objective(v, model.reconstruction());
    case ObjectiveKind::penalized:
      break;
  }
  throw Error("param", "objective(): kind must be euclidean or kl");
}

double snmf_objective(const DataMatrix& v, const Dense& w, const Dense& h, SnmfSide side,
                      double eta, double beta) {
  double sparse_term = 0.0;
  double ridge_term = 0.0;
  if (side == SnmfSide::right) {
    for (double s : col_sums(h)) sparse_term += s * s;
    ridge_term = frobenius_sq(w);
  } else {
    for (double s : row_sums(w)) sparse_term += s * s;
    ridge_term = frobenius_sq(h);
  }
  return euclidean_objective(v, w, h) + eta * ridge_term + beta * sparse_term;
}

double bmf_objective(const DataMatrix& v, const Dense& w, const Dense& h, double lambda) {
  auto penalty = [](const Dense& x) {
    double s = 0.0;
    for (double t : x.values()) s += t * t * (1.0 - t) * (1.0 - t);
    return s;
  };
  return euclidean_objective(v, w, h) + lambda * (penalty(h) + penalty(w));
}

// ---- connectivity stopping -------------------------------------------------

bool connectivity_stop(const Dense& h, ConnectivityState& state, std::size_t conn_change) {
  std::vector<std::size_t> now(h.cols(), 0);
  for (std::size_t j = 0; j < h.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < h.rows(); ++a)
      if (h(a, j) > h(best, j)) best = a;
    now[j] = best;
  }
  if (state.primed && now == state.assignments) {
    ++state.unchanged;
  } else {
    state.unchanged = 0;
    state.assignments = std::move(now);
    state.primed = true;
  }
  return conn_change > 0 && state.unchanged >= conn_change;
}

// ---- driver ----------------------------------------------------------------

namespace {

struct Loop {
  const DataMatrix& v;
  const FactorConfig& cfg;
  Dense w;
  Dense h;
  double eta = 0.0;
  double lambda = 0.0;
  double sigma2 = 0.0;
  AnlsPenalty pen{};
  AnlsState anls{};

  bool is_anls() const {
    return cfg.method == Method::lsnmf || cfg.method == Method::snmf_l ||
           cfg.method == Method::snmf_r;
  }

  double current_objective() const {
    switch (cfg.method) {
      case Method::nmf_kl:
        return kl_objective(v, matmul(w, h));
      case Method::nsnmf:
        return kl_objective(v, matmul(matmul(w, nsnmf_smoothing(cfg.params.theta, w.cols())), h));
      case Method::snmf_l:
        return snmf_objective(v, w, h, SnmfSide::left, eta, cfg.params.beta);
      case Method::snmf_r:
        return snmf_objective(v, w, h, SnmfSide::right, eta, cfg.params.beta);
      case Method::bmf:
        return bmf_objective(v, w, h, lambda);
      default:
        return euclidean_objective(v, w, h);
    }
  }
};

}  // namespace

FactorResult factorize(const DataMatrix& v, const FactorConfig& cfg) {
  const std::size_t m = v.rows();
  const std::size_t n = v.cols();
  if (cfg.rank < 1 || cfg.rank > std::min(m, n))
    throw Error("rank", "rank " + std::to_string(cfg.rank) + " outside [1, " +
                            std::to_string(std::min(m, n)) + "]");
  if (cfg.max_iter < 1) throw Error("param", "max_iter must be >= 1");
  if (!(cfg.min_residual_delta >= 0.0) || !std::isfinite(cfg.min_residual_delta))
    throw Error("param", "min_residual_delta must be >= 0");
  cfg.params.validate();
  v.require_nonnegative();
  if (cfg.method == Method::bmf) v.require_unit_interval();
  if (cfg.method == Method::bd && cfg.params.burn_in && *cfg.params.burn_in >= cfg.max_iter)
    throw Error("param", "burn_in must be smaller than max_iter");

  RngStream seed_rng(derive_seed(cfg.master_seed, kSeedingStream));
  RngStream sampler(derive_seed(cfg.master_seed, kSamplerStream));
  FactorPair init = seed(v, cfg.rank, cfg.seed, seed_rng);

  Loop L{v, cfg, std::move(init.w), std::move(init.h)};
  const ParamSet& p = cfg.params;
  const bool anls = L.is_anls();
  if (cfg.method == Method::snmf_l || cfg.method == Method::snmf_r) {
    const double vmax = v.max_value();
    L.eta = p.eta.value_or(vmax * vmax);
    L.pen = {cfg.method == Method::snmf_l ? SnmfSide::left : SnmfSide::right, L.eta, p.beta};
  }
  if (anls) L.anls = anls_init(v, L.w, L.h, L.pen, p);
  if (cfg.method == Method::bmf) L.lambda = bmf_lambda(p, 1);
  if (cfg.method == Method::bd || cfg.method == Method::icm)
    L.sigma2 = std::max(kSigmaFloor, euclidean_objective(v, L.w, L.h) / static_cast<double>(m * n));
  const BayesPriors priors{p.alpha_rate, p.beta_rate, p.sigma_shape, p.sigma_scale};
  const std::size_t burn_in = p.burn_in.value_or(cfg.max_iter / 2);

  FactorResult result;
  RunTrace& trace = result.trace;
  ConnectivityState conn;
  Dense w_sum(m, cfg.rank);
  Dense h_sum(cfg.rank, n);
  std::size_t kept = 0;

  double prev = L.current_objective();
  std::size_t n_iter = 0;
  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    if (anls && anls_projected_norm(v, L.w, L.h, L.pen) <= p.pg_tol * L.anls.initial_grad_norm)
      break;
    if (cfg.method == Method::bmf) {
      const double next = bmf_lambda(p, it);
      if (next != L.lambda) {
        L.lambda = next;
        prev = L.current_objective();
      }
    }

    FactorPair f;
    switch (cfg.method) {
      case Method::nmf_eu: f = mu_eu_step(v, L.w, L.h); break;
      case Method::nmf_kl: f = mu_kl_step(v, L.w, L.h); break;
      case Method::nsnmf: f = nsnmf_step(v, L.w, L.h, p.theta); break;
      case Method::bmf: f = bmf_step(v, L.w, L.h, L.lambda); break;
      case Method::lsnmf:
      case Method::snmf_l:
      case Method::snmf_r: f = anls_iterate(v, L.w, L.h, L.pen, L.anls, p); break;
      case Method::bd: {
        BayesState s = bd_gibbs_step(v, L.w, L.h, L.sigma2, priors, sampler);
        f = {std::move(s.w), std::move(s.h)};
        L.sigma2 = s.sigma2;
        break;
      }
      case Method::icm: {
        BayesState s = icm_step(v, L.w, L.h, L.sigma2, priors);
        f = {std::move(s.w), std::move(s.h)};
        L.sigma2 = s.sigma2;
        break;
      }
    }
    L.w = std::move(f.w);
    L.h = std::move(f.h);
    n_iter = it;

    const double obj = L.current_objective();
    if (cfg.track_error) trace.objective.push_back(obj);
    if (cfg.track_factors && it % cfg.track_factors == 0)
      trace.snapshots.push_back({it, L.w, L.h});

    if (cfg.method == Method::bd) {
      // The sampler runs its full length; the model is the post-burn-in mean.
      if (it > burn_in) {
        w_sum = add(w_sum, L.w);
        h_sum = add(h_sum, L.h);
        ++kept;
      }
      continue;
    }
    if (cfg.min_residual_delta > 0.0 && prev - obj <= cfg.min_residual_delta * std::abs(prev))
      break;
    if (cfg.conn_change > 0 && connectivity_stop(L.h, conn, cfg.conn_change)) break;
    prev = obj;
  }

  if (cfg.method == Method::bd && kept > 0) {
    L.w = scale(w_sum, 1.0 / static_cast<double>(kept));
    L.h = scale(h_sum, 1.0 / static_cast<double>(kept));
  }

  FactorModel& model = result.model;
  model.method = cfg.method;
  model.objective_kind = objective_kind(cfg.method);
  if (cfg.method == Method::nsnmf) model.theta = p.theta;
  model.n_iter = n_iter;
  model.final_objective = L.current_objective();
  model.w = std::move(L.w);
  model.h = std::move(L.h);
  return result;
}

}  // namespace nmfkit
