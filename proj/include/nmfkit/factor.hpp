#pragma once

// Factorization engine: per-method update rules, objectives, stopping rules
// and the factorize() driver that ties them to a seeding strategy.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nmfkit/matrix.hpp"
#include "nmfkit/rng.hpp"
#include "nmfkit/seeding.hpp"

namespace nmfkit {

enum class Method { nmf_eu, nmf_kl, lsnmf, snmf_l, snmf_r, nsnmf, bmf, bd, icm };
enum class ObjectiveKind { euclidean, kl, penalized };

/// Parses `nmf-eu`, `nmf-kl`, `lsnmf`, `snmf-l`, `snmf-r`, `nsnmf`, `bmf`,
/// `bd`, `icm`. Throws Error("method") on anything else.
Method parse_method(std::string_view name);
std::string_view method_name(Method m) noexcept;
ObjectiveKind objective_kind(Method m) noexcept;
std::string_view objective_kind_name(ObjectiveKind k) noexcept;
/// True for the Lee-Seung style methods whose zero entries stay zero.
bool is_multiplicative(Method m) noexcept;

/// Method-specific parameters. Unset optionals take data-dependent defaults.
struct ParamSet {
  double theta = 0.5;  // nsnmf smoothing
  std::optional<double> eta;  // snmf: default (max V)^2
  double beta = 1e-4;         // snmf sparsity weight
  double lambda0 = 1.1;       // bmf penalty schedule
  double lambda_growth = 10.0;
  std::size_t lambda_period = 100;
  double lambda_max = 1e7;
  double alpha_rate = 0.0;  // bd/icm exponential prior rate on W
  double beta_rate = 0.0;   // ... and on H
  double sigma_shape = 0.0;
  double sigma_scale = 0.0;
  std::optional<std::size_t> burn_in;  // bd: default max_iter / 2
  double pg_tol = 1e-4;                // lsnmf/snmf, relative to initial gradient norm
  std::size_t inner_max_iter = 20;
  double armijo_beta = 0.1;
  double armijo_sigma = 0.01;

  /// Sets one parameter by name; Error("param") for unknown keys or bad values.
  void set(std::string_view key, double value);
  /// Error("param") unless every field is finite and within range.
  void validate() const;
  static const std::vector<std::string>& keys();
};

struct FactorConfig {
  Method method = Method::nmf_eu;
  std::size_t rank = 1;
  SeedSpec seed;
  std::size_t max_iter = 200;
  double min_residual_delta = 1e-5;  // relative; 0 disables
  std::size_t conn_change = 30;      // 0 disables
  bool track_error = false;
  std::size_t track_factors = 0;  // snapshot every N iterations; 0 = off
  std::uint64_t master_seed = 0;
  ParamSet params;
};

/// Routes a `key=value` setting to either the seeding spec (p_cols, p_rows,
/// dense_fraction, seed_scale) or the method ParamSet.
void apply_param(FactorConfig& config, std::string_view key, double value);

struct FactorModel {
  Dense w;
  Dense h;
  Method method = Method::nmf_eu;
  std::optional<double> theta;
  std::size_t n_iter = 0;
  double final_objective = 0.0;
  ObjectiveKind objective_kind = ObjectiveKind::euclidean;

  /// W H, or W S(theta) H for nsnmf.
  Dense reconstruction() const;
};

struct FactorSnapshot {
  std::size_t iter;
  Dense w;
  Dense h;
};

struct RunTrace {
  std::vector<double> objective;
  std::vector<FactorSnapshot> snapshots;
};

struct FactorResult {
  FactorModel model;
  RunTrace trace;
};

/// Seeds, iterates until a stopping rule fires, and returns the fitted model.
/// Deterministic given config.master_seed.
FactorResult factorize(const DataMatrix& v, const FactorConfig& config);

// ---- objectives ------------------------------------------------------------

/// Euclidean: ||V - R||_F^2. KL: kl_div(V, R) with R floored at kEps where
/// V > 0. R is the model reconstruction. Penalized kinds are not accepted.
double objective(const DataMatrix& v, const FactorModel& model, ObjectiveKind kind);
double euclidean_objective(const DataMatrix& v, const Dense& w, const Dense& h);
double kl_objective(const DataMatrix& v, const Dense& reconstruction);

enum class SnmfSide { left, right };
/// ||V-WH||^2 + eta ||W||^2 + beta sum_j (sum_a H_aj)^2 for side right;
/// roles of W and H swap for side left.
double snmf_objective(const DataMatrix& v, const Dense& w, const Dense& h, SnmfSide side,
                      double eta, double beta);
/// ||V-WH||^2 + lambda sum H^2(1-H)^2 + lambda sum W^2(1-W)^2
double bmf_objective(const DataMatrix& v, const Dense& w, const Dense& h, double lambda);

// ---- multiplicative methods ------------------------------------------------

FactorPair mu_eu_step(const DataMatrix& v, const Dense& w, const Dense& h);
FactorPair mu_kl_step(const DataMatrix& v, const Dense& w, const Dense& h);

/// S(theta) = (1 - theta) I + (theta / k) 1 1^T
Dense nsnmf_smoothing(double theta, std::size_t k);
FactorPair nsnmf_step(const DataMatrix& v, const Dense& w, const Dense& h, double theta);

FactorPair bmf_step(const DataMatrix& v, const Dense& w, const Dense& h, double lambda);
/// lambda0 * growth^floor((iter-1)/period), capped at lambda_max. iter is 1-based.
double bmf_lambda(const ParamSet& p, std::size_t iter);

// ---- projected-gradient ANLS -----------------------------------------------

struct PgOptions {
  double tol = 1e-6;
  std::size_t max_iter = 20;
  double beta = 0.1;   // step shrink/grow factor
  double sigma = 0.01;  // sufficient decrease constant
};

struct PgResult {
  Dense x;
  /// Gradient steps taken; 0 means X0 already met the tolerance.
  std::size_t steps = 0;
  double projected_grad_norm = 0.0;
};

/// min_{X >= 0} 0.5 ||A X - B||_F^2 by projected gradient with an Armijo
/// search along the projection arc (gradient A^T A X - A^T B).
PgResult pg_nnls(const Dense& a, const Dense& b, const Dense& x0, const PgOptions& opt);
/// Same solver given the normal-equation pieces A^T A and A^T B.
PgResult pg_nnls_gram(const Dense& ata, const Dense& atb, Dense x0, const PgOptions& opt);
/// Norm of the projected gradient: entries with grad < 0 or x > 0.
double projected_gradient_norm(const Dense& grad, const Dense& x);

/// Ridge/sparsity terms added to the two Gram matrices of an ANLS sweep.
struct AnlsPenalty {
  SnmfSide side = SnmfSide::right;
  double eta = 0.0;
  double beta = 0.0;
};

/// Adaptive subproblem tolerances carried between outer iterations.
struct AnlsState {
  double initial_grad_norm = 0.0;
  double tol_w = 0.0;
  double tol_h = 0.0;
};

AnlsState anls_init(const DataMatrix& v, const Dense& w, const Dense& h,
                    const AnlsPenalty& pen, const ParamSet& params);
/// Projected-gradient norm of the full (penalized) problem at (W, H).
double anls_projected_norm(const DataMatrix& v, const Dense& w, const Dense& h,
                           const AnlsPenalty& pen);
/// One alternation: H from its NNLS subproblem, then W.
FactorPair anls_iterate(const DataMatrix& v, const Dense& w, const Dense& h,
                        const AnlsPenalty& pen, AnlsState& state, const ParamSet& params);
FactorPair lsnmf_iterate(const DataMatrix& v, const Dense& w, const Dense& h,
                         AnlsState& state, const ParamSet& params);
FactorPair snmf_iterate(const DataMatrix& v, const Dense& w, const Dense& h, SnmfSide side,
                        double eta, double beta, AnlsState& state, const ParamSet& params);

// ---- Bayesian NMF ----------------------------------------------------------

struct BayesPriors {
  double alpha_rate = 0.0;
  double beta_rate = 0.0;
  double sigma_shape = 0.0;
  double sigma_scale = 0.0;
};

struct BayesState {
  Dense w;
  Dense h;
  double sigma2;
};

inline constexpr double kSigmaFloor = 1e-12;

/// Draw from N(mu, var) truncated to [0, inf) by inverse CDF.
double sample_rectified_normal(double mu, double var, RngStream& rng);
/// One Gibbs sweep over W columns, H rows, then sigma^2.
BayesState bd_gibbs_step(const DataMatrix& v, const Dense& w, const Dense& h, double sigma2,
                         const BayesPriors& priors, RngStream& rng);
/// Conditional-mode counterpart of bd_gibbs_step.
BayesState icm_step(const DataMatrix& v, const Dense& w, const Dense& h, double sigma2,
                    const BayesPriors& priors);

// ---- connectivity stopping -------------------------------------------------

struct ConnectivityState {
  std::vector<std::size_t> assignments;
  std::size_t unchanged = 0;
  bool primed = false;
};

/// Updates the run of unchanged dominant-row assignments of H's columns and
/// reports whether it reached conn_change.
bool connectivity_stop(const Dense& h, ConnectivityState& state, std::size_t conn_change);

}  // namespace nmfkit
