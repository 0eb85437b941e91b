// Projected-gradient NNLS and the alternating (lsnmf / snmf) sweeps built on it.

#include <algorithm>
#include <cmath>

#include "nmfkit/error.hpp"
#include "nmfkit/factor.hpp"

namespace nmfkit {

double projected_gradient_norm(const Dense& grad, const Dense& x) {
  double s = 0.0;
  auto g = grad.values();
  auto xv = x.values();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] < 0.0 || xv[i] > 0.0) s += g[i] * g[i];
  return std::sqrt(s);
}

PgResult pg_nnls_gram(const Dense& ata, const Dense& atb, Dense x, const PgOptions& opt) {
  if (ata.rows() != ata.cols() || ata.cols() != x.rows() || atb.rows() != x.rows() ||
      atb.cols() != x.cols())
    throw Error("shape", "pg_nnls: Gram, right-hand side and X0 do not conform");
  if (!all_finite_nonnegative(x)) throw Error("domain", "pg_nnls: X0 must be nonnegative");

  constexpr int kMaxSearch = 20;
  double alpha = 1.0;
  PgResult res;
  for (;;) {
    const Dense grad = subtract(matmul(ata, x), atb);
    res.projected_grad_norm = projected_gradient_norm(grad, x);
    if (res.projected_grad_norm <= opt.tol || res.steps >= opt.max_iter) break;

    // Armijo search along the projection arc. The first trial decides
    // whether alpha shrinks until acceptance or grows while acceptable.
    Dense prev = x;
    bool shrinking = false;
    bool accepted_any = false;
    for (int t = 0; t < kMaxSearch; ++t) {
      Dense cand = x;
      for (std::size_t i = 0; i < cand.size(); ++i)
        cand.values()[i] = std::max(0.0, x.values()[i] - alpha * grad.values()[i]);
      const Dense d = subtract(cand, x);
      const double gradd = dot(grad, d);
      const double dqd = dot(matmul(ata, d), d);
      const bool sufficient = (1.0 - opt.sigma) * gradd + 0.5 * dqd < 0.0;
      if (t == 0) shrinking = !sufficient;
      if (shrinking) {
        if (sufficient) {
          prev = std::move(cand);
          accepted_any = true;
          break;
        }
        alpha *= opt.beta;
      } else {
        if (!sufficient || cand == prev) break;
        alpha /= opt.beta;
        prev = std::move(cand);
        accepted_any = true;
      }
    }
    if (accepted_any) x = std::move(prev);
    ++res.steps;
  }
  res.x = std::move(x);
  return res;
}

PgResult pg_nnls(const Dense& a, const Dense& b, const Dense& x0, const PgOptions& opt) {
  if (a.rows() != b.rows()) throw Error("shape", "pg_nnls: A and B row counts differ");
  if (x0.rows() != a.cols() || x0.cols() != b.cols())
    throw Error("shape", "pg_nnls: X0 must be cols(A) x cols(B)");
  const Dense at = transpose(a);
  return pg_nnls_gram(matmul(at, a), matmul(at, b), x0, opt);
}

// ---- ANLS ------------------------------------------------------------------

namespace {

// Adds the side-specific penalty to a k x k Gram matrix: `ridge` * I or
// `lasso` * 1 1^T (only one of the two is nonzero for a given factor).
Dense penalized_gram(Dense g, double ridge, double lasso) {
  const std::size_t k = g.rows();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) g(i, j) += lasso;
    g(i, i) += ridge;
  }
  return g;
}

struct GramPieces {
  Dense ata;
  Dense atb;
};

// Subproblem for H with W fixed.
GramPieces h_problem(const DataMatrix& v, const Dense& w, const AnlsPenalty& pen) {
  const double ridge = pen.side == SnmfSide::left ? pen.eta : 0.0;
  const double lasso = pen.side == SnmfSide::right ? pen.beta : 0.0;
  return {penalized_gram(gram(w), ridge, lasso), matmul(transpose(w), v)};
}

// Subproblem for W^T with H fixed.
GramPieces wt_problem(const DataMatrix& v, const Dense& h, const AnlsPenalty& pen) {
  const double ridge = pen.side == SnmfSide::right ? pen.eta : 0.0;
  const double lasso = pen.side == SnmfSide::left ? pen.beta : 0.0;
  return {penalized_gram(outer_gram(h), ridge, lasso), transpose(matmul(v, transpose(h)))};
}

PgOptions sub_options(const ParamSet& p, double tol) {
  PgOptions o;
  o.tol = tol;
  o.max_iter = p.inner_max_iter;
  o.beta = p.armijo_beta;
  o.sigma = p.armijo_sigma;
  return o;
}

struct Gradients {
  Dense gw_t;  // gradient w.r.t. W^T
  Dense gh;
};

Gradients full_gradients(const DataMatrix& v, const Dense& w, const Dense& h,
                         const AnlsPenalty& pen) {
  const GramPieces hp = h_problem(v, w, pen);
  const GramPieces wp = wt_problem(v, h, pen);
  return {subtract(matmul(wp.ata, transpose(w)), wp.atb), subtract(matmul(hp.ata, h), hp.atb)};
}

}  // namespace

double anls_projected_norm(const DataMatrix& v, const Dense& w, const Dense& h,
                           const AnlsPenalty& pen) {
  const Gradients g = full_gradients(v, w, h, pen);
  const double a = projected_gradient_norm(g.gw_t, transpose(w));
  const double b = projected_gradient_norm(g.gh, h);
  return std::sqrt(a * a + b * b);
}

AnlsState anls_init(const DataMatrix& v, const Dense& w, const Dense& h,
                    const AnlsPenalty& pen, const ParamSet& params) {
  const Gradients g = full_gradients(v, w, h, pen);
  AnlsState s;
  s.initial_grad_norm = std::sqrt(frobenius_sq(g.gw_t) + frobenius_sq(g.gh));
  s.tol_w = std::max(1e-3, params.pg_tol) * s.initial_grad_norm;
  s.tol_h = s.tol_w;
  return s;
}

FactorPair anls_iterate(const DataMatrix& v, const Dense& w, const Dense& h,
                        const AnlsPenalty& pen, AnlsState& state, const ParamSet& params) {
  if (w.rows() != v.rows() || h.cols() != v.cols() || w.cols() != h.rows())
    throw Error("shape", "factors do not conform to V");

  const GramPieces hp = h_problem(v, w, pen);
  PgResult rh = pg_nnls_gram(hp.ata, hp.atb, h, sub_options(params, state.tol_h));
  if (rh.steps == 0) state.tol_h *= 0.1;

  const GramPieces wp = wt_problem(v, rh.x, pen);
  PgResult rw = pg_nnls_gram(wp.ata, wp.atb, transpose(w), sub_options(params, state.tol_w));
  if (rw.steps == 0) state.tol_w *= 0.1;

  return {transpose(rw.x), std::move(rh.x)};
}

FactorPair lsnmf_iterate(const DataMatrix& v, const Dense& w, const Dense& h,
                         AnlsState& state, const ParamSet& params) {
  return anls_iterate(v, w, h, AnlsPenalty{}, state, params);
}

FactorPair snmf_iterate(const DataMatrix& v, const Dense& w, const Dense& h, SnmfSide side,
                        double eta, double beta, AnlsState& state, const ParamSet& params) {
  if (!(eta >= 0.0) || !(beta >= 0.0)) throw Error("param", "snmf penalties must be >= 0");
  return anls_iterate(v, w, h, AnlsPenalty{side, eta, beta}, state, params);
}

}  // namespace nmfkit
