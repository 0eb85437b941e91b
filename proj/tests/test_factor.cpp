#include <doctest.h>

#include <cmath>

#include "nmfkit/factor.hpp"
#include "nmfkit/quality.hpp"
#include "support.hpp"

using namespace nmfkit;
using testing::error_kind;
using testing::max_abs_diff;
using testing::random_dense;

namespace {

FactorConfig config_for(Method m, std::size_t k, std::size_t iters, std::uint64_t seed = 1) {
  FactorConfig c;
  c.method = m;
  c.rank = k;
  c.max_iter = iters;
  c.master_seed = seed;
  return c;
}

constexpr Method kAllMethods[] = {Method::nmf_eu, Method::nmf_kl, Method::lsnmf,
                                  Method::snmf_l, Method::snmf_r, Method::nsnmf,
                                  Method::bmf,    Method::bd,     Method::icm};

}  // namespace

TEST_CASE("method names") {
  for (Method m : kAllMethods) CHECK(parse_method(method_name(m)) == m);
  CHECK(error_kind([] { parse_method("unknown"); }) == "method");
  CHECK(objective_kind(Method::nmf_kl) == ObjectiveKind::kl);
  CHECK(objective_kind(Method::lsnmf) == ObjectiveKind::euclidean);
  CHECK(objective_kind(Method::bd) == ObjectiveKind::euclidean);
  CHECK(objective_kind(Method::snmf_r) == ObjectiveKind::penalized);
}

TEST_CASE("parameters") {
  ParamSet p;
  p.set("theta", 0.25);
  CHECK(p.theta == 0.25);
  CHECK(error_kind([&] { p.set("gamma", 1.0); }) == "param");
  CHECK(error_kind([&] { p.set("inner_max_iter", 2.5); }) == "param");
  p.theta = 1.5;
  CHECK(error_kind([&] { p.validate(); }) == "param");
  CHECK(ParamSet::keys().size() == 16);

  FactorConfig c;
  apply_param(c, "p_cols", 3);
  apply_param(c, "dense_fraction", 0.5);
  apply_param(c, "beta", 0.5);
  CHECK(c.seed.p_cols == 3u);
  CHECK(c.seed.dense_fraction == 0.5);
  CHECK(c.params.beta == 0.5);
}

TEST_CASE("smoothing matrix") {
  CHECK(nsnmf_smoothing(0.0, 3) == Dense::identity(3));
  CHECK(nsnmf_smoothing(1.0, 2) == Dense{{0.5, 0.5}, {0.5, 0.5}});
  for (double theta : {0.0, 0.1, 0.5, 0.9, 1.0})
    for (std::size_t k = 1; k <= 6; ++k)
      for (double s : row_sums(nsnmf_smoothing(theta, k))) CHECK(s == doctest::Approx(1.0));
  CHECK(error_kind([] { nsnmf_smoothing(1.1, 2); }) == "param");
}

TEST_CASE("euclidean multiplicative step") {
  const DataMatrix eye(Dense::identity(2));
  const FactorPair f = mu_eu_step(eye, Dense::identity(2), Dense::identity(2));
  CHECK(max_abs_diff(f.w, Dense::identity(2)) < 1e-15);
  CHECK(max_abs_diff(f.h, Dense::identity(2)) < 1e-15);

  RngStream rng(4);
  const DataMatrix v(random_dense(8, 6, rng));
  Dense w = random_dense(8, 3, rng);
  Dense h = random_dense(3, 6, rng);
  h(1, 2) = 0.0;
  double prev = euclidean_objective(v, w, h);
  for (int s = 0; s < 200; ++s) {
    FactorPair n = mu_eu_step(v, w, h);
    w = std::move(n.w);
    h = std::move(n.h);
    const double obj = euclidean_objective(v, w, h);
    CHECK(obj <= prev + 1e-12);
    prev = obj;
  }
  CHECK(h(1, 2) == 0.0);
  CHECK(error_kind([&] { mu_eu_step(v, Dense(7, 3), h); }) == "shape");
}

TEST_CASE("kl multiplicative step") {
  const DataMatrix ones2(ones(2, 2));
  const FactorPair f = mu_kl_step(ones2, Dense{{1}, {1}}, Dense{{1, 1}});
  CHECK(max_abs_diff(f.w, Dense{{1}, {1}}) < 1e-15);
  CHECK(max_abs_diff(f.h, Dense{{1, 1}}) < 1e-15);

  RngStream rng(5);
  const DataMatrix v(random_dense(9, 7, rng));
  Dense w = random_dense(9, 3, rng);
  Dense h = random_dense(3, 7, rng);
  double prev = kl_objective(v, matmul(w, h));
  for (int s = 0; s < 200; ++s) {
    FactorPair n = mu_kl_step(v, w, h);
    w = std::move(n.w);
    h = std::move(n.h);
    CHECK(all_finite_nonnegative(w));
    CHECK(all_finite_nonnegative(h));
    const double obj = kl_objective(v, matmul(w, h));
    CHECK(obj <= prev + 1e-10);
    prev = obj;
  }
}

TEST_CASE("nonsmooth step") {
  RngStream rng(6);
  const DataMatrix v(random_dense(7, 6, rng));
  Dense w = random_dense(7, 3, rng);
  Dense h = random_dense(3, 6, rng);
  const FactorPair a = nsnmf_step(v, w, h, 0.0);
  const FactorPair b = mu_kl_step(v, w, h);
  CHECK(a.w == b.w);
  CHECK(a.h == b.h);

  const Dense s = nsnmf_smoothing(0.5, 3);
  double prev = kl_objective(v, matmul(matmul(w, s), h));
  for (int t = 0; t < 100; ++t) {
    FactorPair n = nsnmf_step(v, w, h, 0.5);
    w = std::move(n.w);
    h = std::move(n.h);
    CHECK(all_finite_nonnegative(w));
    const double obj = kl_objective(v, matmul(matmul(w, s), h));
    CHECK(obj <= prev + 1e-10);
    prev = obj;
  }
}

TEST_CASE("binary step") {
  RngStream rng(7);
  const DataMatrix v(random_dense(6, 5, rng));
  Dense w = random_dense(6, 2, rng);
  Dense h = random_dense(2, 5, rng);
  const FactorPair a = bmf_step(v, w, h, 0.0);
  const FactorPair b = mu_eu_step(v, w, h);
  CHECK(a.w == b.w);
  CHECK(a.h == b.h);
  w(2, 1) = 0.0;
  CHECK(bmf_step(v, w, h, 5.0).w(2, 1) == 0.0);

  ParamSet p;
  CHECK(bmf_lambda(p, 1) == 1.1);
  CHECK(bmf_lambda(p, 100) == 1.1);
  CHECK(bmf_lambda(p, 101) == doctest::Approx(11.0));
  CHECK(bmf_lambda(p, 201) == doctest::Approx(110.0));
  CHECK(bmf_lambda(p, 100000) == 1e7);
}

TEST_CASE("projected gradient nnls") {
  PgOptions opt;
  opt.tol = 1e-12;
  opt.max_iter = 1000;
  const PgResult r = pg_nnls(Dense::identity(2), Dense{{-1}, {2}}, Dense{{1}, {1}}, opt);
  CHECK(max_abs_diff(r.x, Dense{{0}, {2}}) < 1e-10);
  CHECK(r.projected_grad_norm <= opt.tol);

  RngStream rng(8);
  const Dense b = random_dense(3, 4, rng);
  const PgResult id = pg_nnls(Dense::identity(3), b, Dense(3, 4, 1.0), opt);
  CHECK(max_abs_diff(id.x, b) < 1e-10);

  for (int t = 0; t < 50; ++t) {
    const Dense a = random_dense(6, 3, rng);
    const Dense rhs = random_dense(6, 2, rng, -1.0, 1.0);
    PgOptions o;
    o.tol = 1e-6;
    o.max_iter = 5000;
    const PgResult s = pg_nnls(a, rhs, Dense(3, 2, 0.5), o);
    CHECK(s.projected_grad_norm <= o.tol);
    CHECK(all_finite_nonnegative(s.x));
    const Dense grad = subtract(matmul(gram(a), s.x), matmul(transpose(a), rhs));
    CHECK(projected_gradient_norm(grad, s.x) == doctest::Approx(s.projected_grad_norm));
  }
  CHECK(error_kind([&] { pg_nnls(Dense(3, 2), Dense(4, 1), Dense(2, 1), opt); }) == "shape");
}

TEST_CASE("lsnmf keeps an exact factorization") {
  RngStream rng(9);
  const Dense w0 = random_dense(10, 3, rng, 0.1, 1.0);
  const Dense h0 = random_dense(3, 8, rng, 0.1, 1.0);
  const DataMatrix v(matmul(w0, h0));
  ParamSet p;
  AnlsState st = anls_init(v, w0, h0, AnlsPenalty{}, p);
  CHECK(st.initial_grad_norm < 1e-12);
  const FactorPair f = lsnmf_iterate(v, w0, h0, st, p);
  CHECK(max_abs_diff(f.w, w0) < 1e-10);
  CHECK(max_abs_diff(f.h, h0) < 1e-10);
}

TEST_CASE("lsnmf objective is non-increasing") {
  RngStream rng(10);
  const DataMatrix v(random_dense(12, 9, rng));
  ParamSet p;
  Dense w = random_dense(12, 4, rng);
  Dense h = random_dense(4, 9, rng);
  AnlsState st = anls_init(v, w, h, AnlsPenalty{}, p);
  double prev = euclidean_objective(v, w, h);
  for (int t = 0; t < 60; ++t) {
    FactorPair f = lsnmf_iterate(v, w, h, st, p);
    w = std::move(f.w);
    h = std::move(f.h);
    const double obj = euclidean_objective(v, w, h);
    CHECK(obj <= prev + 1e-10);
    prev = obj;
  }
}

TEST_CASE("snmf without penalties is lsnmf") {
  RngStream rng(11);
  const DataMatrix v(random_dense(8, 7, rng));
  const Dense w = random_dense(8, 3, rng);
  const Dense h = random_dense(3, 7, rng);
  ParamSet p;
  AnlsState a = anls_init(v, w, h, AnlsPenalty{}, p);
  AnlsState b = a;
  const FactorPair x = lsnmf_iterate(v, w, h, a, p);
  const FactorPair y = snmf_iterate(v, w, h, SnmfSide::right, 0.0, 0.0, b, p);
  CHECK(x.w == y.w);
  CHECK(x.h == y.h);
}

TEST_CASE("snmf matches the stacked least-squares systems") {
  RngStream rng(12);
  for (SnmfSide side : {SnmfSide::right, SnmfSide::left}) {
    for (int t = 0; t < 10; ++t) {
      const std::size_t m = 6 + rng.below(5);
      const std::size_t n = 5 + rng.below(5);
      const std::size_t k = 2 + rng.below(2);
      const Dense vd = random_dense(m, n, rng);
      const DataMatrix v(vd);
      const Dense w = random_dense(m, k, rng);
      const Dense h = random_dense(k, n, rng);
      const double eta = 0.7;
      const double beta = 0.3;
      ParamSet p;
      const AnlsPenalty pen{side, eta, beta};
      AnlsState st = anls_init(v, w, h, pen, p);
      const AnlsState st0 = st;
      const FactorPair got = snmf_iterate(v, w, h, side, eta, beta, st, p);

      // Reference: explicit stacked systems solved by pg_nnls.
      PgOptions o;
      o.max_iter = p.inner_max_iter;
      o.beta = p.armijo_beta;
      o.sigma = p.armijo_sigma;
      const double h_ridge = side == SnmfSide::left ? eta : 0.0;
      const double h_lasso = side == SnmfSide::right ? beta : 0.0;
      const double w_ridge = side == SnmfSide::right ? eta : 0.0;
      const double w_lasso = side == SnmfSide::left ? beta : 0.0;

      // H: A = [W; sqrt(lasso) 1^T; sqrt(ridge) I], B = [V; 0; 0]
      Dense ah(m + 1 + k, k);
      Dense bh(m + 1 + k, n);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t a = 0; a < k; ++a) ah(i, a) = w(i, a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) bh(i, j) = vd(i, j);
      for (std::size_t a = 0; a < k; ++a) {
        ah(m, a) = std::sqrt(h_lasso);
        ah(m + 1 + a, a) = std::sqrt(h_ridge);
      }
      o.tol = st0.tol_h;
      const Dense h1 = pg_nnls(ah, bh, h, o).x;

      Dense aw(n + 1 + k, k);
      Dense bw(n + 1 + k, m);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t a = 0; a < k; ++a) aw(j, a) = h1(a, j);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) bw(j, i) = vd(i, j);
      for (std::size_t a = 0; a < k; ++a) {
        aw(n, a) = std::sqrt(w_lasso);
        aw(n + 1 + a, a) = std::sqrt(w_ridge);
      }
      o.tol = st0.tol_w;
      const Dense w1 = transpose(pg_nnls(aw, bw, transpose(w), o).x);

      CHECK(max_abs_diff(got.h, h1) < 1e-9);
      CHECK(max_abs_diff(got.w, w1) < 1e-9);
    }
  }
}

TEST_CASE("snmf penalized objective is non-increasing") {
  RngStream rng(13);
  for (SnmfSide side : {SnmfSide::right, SnmfSide::left}) {
    const DataMatrix v(random_dense(10, 8, rng));
    Dense w = random_dense(10, 3, rng);
    Dense h = random_dense(3, 8, rng);
    ParamSet p;
    const AnlsPenalty pen{side, 1.0, 0.5};
    AnlsState st = anls_init(v, w, h, pen, p);
    double prev = snmf_objective(v, w, h, side, 1.0, 0.5);
    for (int t = 0; t < 40; ++t) {
      FactorPair f = snmf_iterate(v, w, h, side, 1.0, 0.5, st, p);
      w = std::move(f.w);
      h = std::move(f.h);
      const double obj = snmf_objective(v, w, h, side, 1.0, 0.5);
      CHECK(obj <= prev + 1e-10);
      prev = obj;
    }
  }
}

TEST_CASE("sparsity weight makes H sparser") {
  int sparser = 0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    RngStream rng(s);
    const DataMatrix v(random_dense(12, 10, rng));
    FactorConfig c = config_for(Method::snmf_r, 3, 200, s);
    c.params.beta = 0.0;
    const FactorModel plain = factorize(v, c).model;
    c.params.beta = 1.0;
    const FactorModel sparse = factorize(v, c).model;
    if (nmfkit::sparseness(sparse).h > nmfkit::sparseness(plain).h) ++sparser;
  }
  CHECK(sparser >= 8);
}

TEST_CASE("rectified normal sampler") {
  RngStream rng(14);
  CHECK(error_kind([&] { sample_rectified_normal(0.0, 0.0, rng); }) == "param");
  CHECK(error_kind([&] { sample_rectified_normal(0.0, -1.0, rng); }) == "param");
  double tail_mean = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double x = sample_rectified_normal(-40.0, 1.0, rng);
    CHECK(x >= 0.0);
    tail_mean += x;
  }
  // Mean of N(-40, 1) truncated to [0, inf) is about 1/40.
  CHECK(tail_mean / 20000 == doctest::Approx(0.025).epsilon(0.05));
  double far = 0.0;
  for (int i = 0; i < 20000; ++i) far += sample_rectified_normal(5.0, 1.0, rng);
  CHECK(far / 20000 == doctest::Approx(5.0).epsilon(0.01));
}

TEST_CASE("gibbs chain stays near a well-fitting truth") {
  RngStream rng(15);
  const std::size_t m = 20;
  const std::size_t n = 15;
  const Dense w0 = random_dense(m, 2, rng, 0.5, 1.5);
  const Dense h0 = random_dense(2, n, rng, 0.5, 1.5);
  Dense vd = matmul(w0, h0);
  for (double& x : vd.values()) x = std::max(0.0, x + 0.01 * rng.normal());
  const DataMatrix v(vd);
  const double initial = euclidean_objective(v, w0, h0);

  BayesState s{w0, h0, 1e-4};
  RngStream chain(16);
  std::vector<double> sig;
  for (int t = 0; t < 200; ++t) {
    s = bd_gibbs_step(v, s.w, s.h, s.sigma2, BayesPriors{}, chain);
    CHECK(all_finite_nonnegative(s.w));
    CHECK(all_finite_nonnegative(s.h));
    CHECK(s.sigma2 > 0.0);
    sig.push_back(s.sigma2);
  }
  CHECK(euclidean_objective(v, s.w, s.h) <= 3.0 * initial);
  double mean_sig = 0.0;
  for (std::size_t t = 100; t < sig.size(); ++t) mean_sig += sig[t];
  mean_sig /= 100.0;
  CHECK(mean_sig > 1e-5);
  CHECK(mean_sig < 1e-3);
}

TEST_CASE("icm conditional modes") {
  const DataMatrix v(Dense{{2}});
  const BayesState s = icm_step(v, Dense{{5}}, Dense{{1}}, 1.0, BayesPriors{});
  CHECK(s.w(0, 0) == 2.0);
  CHECK(s.h(0, 0) == 1.0);
  CHECK(s.sigma2 == kSigmaFloor);

  BayesPriors pr;
  pr.sigma_scale = 0.3;
  CHECK(icm_step(v, Dense{{2}}, Dense{{1}}, 1.0, pr).sigma2 == doctest::Approx(0.2));

  pr.alpha_rate = 1.0;
  const BayesState z = icm_step(DataMatrix(Dense{{0}}), Dense{{1}}, Dense{{1}}, 1.0, pr);
  CHECK(z.w(0, 0) == 0.0);
}

TEST_CASE("objectives") {
  const DataMatrix v(Dense{{2}});
  FactorModel m;
  m.w = Dense{{1}};
  m.h = Dense{{1}};
  CHECK(objective(v, m, ObjectiveKind::euclidean) == 1.0);
  m.w = Dense{{2}};
  CHECK(objective(v, m, ObjectiveKind::euclidean) == 0.0);
  CHECK(objective(v, m, ObjectiveKind::kl) == 0.0);
  CHECK(error_kind([&] { objective(v, m, ObjectiveKind::penalized); }) == "param");

  RngStream rng(17);
  FactorModel ns;
  ns.method = Method::nsnmf;
  ns.theta = 0.4;
  ns.w = random_dense(5, 3, rng);
  ns.h = random_dense(3, 4, rng);
  const Dense explicit_product =
      testing::naive_matmul(testing::naive_matmul(ns.w, nsnmf_smoothing(0.4, 3)), ns.h);
  CHECK(max_abs_diff(ns.reconstruction(), explicit_product) < 1e-14);

  const DataMatrix one(Dense{{1}});
  CHECK(kl_objective(one, Dense{{0}}) > 30.0);
}

TEST_CASE("connectivity stopping") {
  const Dense h{{0.9, 0.1, 0.5}, {0.1, 0.9, 0.5}};
  ConnectivityState st;
  CHECK_FALSE(connectivity_stop(h, st, 30));
  for (int i = 1; i < 30; ++i) CHECK_FALSE(connectivity_stop(h, st, 30));
  CHECK(connectivity_stop(h, st, 30));
  CHECK(st.assignments == std::vector<std::size_t>{0, 1, 0});

  const Dense moved{{0.1, 0.1, 0.5}, {0.9, 0.9, 0.5}};
  CHECK_FALSE(connectivity_stop(moved, st, 30));
  CHECK(st.unchanged == 0u);
}

TEST_CASE("factorize contracts") {
  RngStream rng(18);
  const Dense w0 = random_dense(6, 2, rng, 0.1, 1.0);
  const Dense h0 = random_dense(2, 5, rng, 0.1, 1.0);
  const DataMatrix v(matmul(w0, h0));
  FactorConfig c = config_for(Method::nmf_eu, 2, 200);
  c.seed.kind = SeedKind::fixed;
  c.seed.fixed_w = w0;
  c.seed.fixed_h = h0;
  const FactorModel fit = factorize(v, c).model;
  CHECK(fit.final_objective <= 1e-20);
  CHECK(fit.n_iter <= 2u);

  c.rank = 6;
  CHECK(error_kind([&] { factorize(v, c); }) == "rank");
  c = config_for(Method::bmf, 2, 10);
  CHECK(error_kind([&] { factorize(DataMatrix(Dense(3, 3, 2.0)), c); }) == "domain");
  c = config_for(Method::nmf_eu, 2, 10);
  CHECK(error_kind([&] { factorize(DataMatrix(Dense{{1, -1}, {1, 1}}), c); }) == "domain");
  c.max_iter = 0;
  CHECK(error_kind([&] { factorize(v, c); }) == "param");
}

TEST_CASE("every method: determinism, nonnegativity, tracking") {
  RngStream rng(19);
  const DataMatrix v(random_dense(9, 7, rng));
  for (Method m : kAllMethods) {
    CAPTURE(method_name(m));
    FactorConfig c = config_for(m, 3, 40, 77);
    c.track_error = true;
    c.track_factors = 10;
    c.min_residual_delta = 0.0;
    c.conn_change = 0;
    const FactorResult a = factorize(v, c);
    const FactorResult b = factorize(v, c);
    CHECK(a.model.w == b.model.w);
    CHECK(a.model.h == b.model.h);
    CHECK(all_finite_nonnegative(a.model.w));
    CHECK(all_finite_nonnegative(a.model.h));
    CHECK(a.model.n_iter <= 40u);
    CHECK(a.trace.objective.size() == a.model.n_iter);
    CHECK(a.trace.snapshots.size() == a.model.n_iter / 10);
    CHECK(a.model.objective_kind == objective_kind(m));
    c.master_seed = 78;
    const FactorResult d = factorize(v, c);
    CHECK(d.model.w != a.model.w);
  }
}

TEST_CASE("multiplicative zero locking through factorize") {
  RngStream rng(20);
  const DataMatrix v(random_dense(6, 5, rng));
  Dense w0 = random_dense(6, 2, rng);
  Dense h0 = random_dense(2, 5, rng);
  w0(3, 1) = 0.0;
  h0(0, 4) = 0.0;
  for (Method m : {Method::nmf_eu, Method::nmf_kl, Method::nsnmf, Method::bmf}) {
    FactorConfig c = config_for(m, 2, 50);
    c.seed.kind = SeedKind::fixed;
    c.seed.fixed_w = w0;
    c.seed.fixed_h = h0;
    const FactorModel f = factorize(v, c).model;
    CHECK(f.w(3, 1) == 0.0);
    CHECK(f.h(0, 4) == 0.0);
    CHECK(is_multiplicative(m));
  }
}

TEST_CASE("bayesian mean uses the post burn-in samples") {
  RngStream rng(21);
  const DataMatrix v(random_dense(6, 5, rng, 0.1, 1.0));
  FactorConfig c = config_for(Method::bd, 2, 20);
  c.track_factors = 1;
  const FactorResult r = factorize(v, c);
  CHECK(r.model.n_iter == 20u);
  Dense w_sum(6, 2);
  for (const auto& s : r.trace.snapshots)
    if (s.iter > 10) w_sum = add(w_sum, s.w);
  CHECK(max_abs_diff(r.model.w, scale(w_sum, 0.1)) < 1e-15);
  c.params.burn_in = 20;
  CHECK(error_kind([&] { factorize(v, c); }) == "param");
}
