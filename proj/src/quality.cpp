#include "nmfkit/quality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nmfkit/error.hpp"

namespace nmfkit {

double rss(const DataMatrix& v, const FactorModel& model) {
  return residual_sq(v, model.reconstruction());
}

double evar(const DataMatrix& v, const FactorModel& model) {
  const double total = frobenius_sq(v);
  if (!(total > 0.0)) throw Error("degenerate", "explained variance undefined for an all-zero V");
  return 1.0 - rss(v, model) / total;
}

Metric parse_metric(std::string_view name) {
  if (name == "euclidean") return Metric::euclidean;
  if (name == "kl") return Metric::kl;
  throw Error("metric", "unknown distance metric '" + std::string(name) + "'");
}

double distance(const DataMatrix& v, const FactorModel& model, Metric metric) {
  if (metric == Metric::euclidean) return std::sqrt(rss(v, model));
  return kl_objective(v, model.reconstruction());
}

double hoyer_sparseness(std::span<const double> x, bool* degenerate) {
  double l1 = 0.0;
  double l2 = 0.0;
  for (double e : x) {
    l1 += std::abs(e);
    l2 += e * e;
  }
  if (x.size() < 2 || l2 == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  const double first = std::abs(x[0]);
  if (std::all_of(x.begin(), x.end(), [&](double e) { return std::abs(e) == first; })) return 0.0;
  const double root_n = std::sqrt(static_cast<double>(x.size()));
  const double sp = (root_n - l1 / std::sqrt(l2)) / (root_n - 1.0);
  return std::clamp(sp, 0.0, 1.0);
}

SparsenessAxis parse_sparseness_axis(std::string_view name) {
  if (name == "columns") return SparsenessAxis::columns;
  if (name == "rows") return SparsenessAxis::rows;
  throw Error("param", "sparseness axis must be 'columns' or 'rows'");
}

namespace {

double mean_sparseness(const Dense& m, SparsenessAxis axis, const char* label,
                       std::vector<std::string>& warnings) {
  const Dense oriented = axis == SparsenessAxis::columns ? transpose(m) : m;
  if (oriented.rows() == 0) return 0.0;
  double total = 0.0;
  std::size_t flagged = 0;
  for (std::size_t r = 0; r < oriented.rows(); ++r) {
    bool degenerate = false;
    total += hoyer_sparseness(oriented.row(r), &degenerate);
    if (degenerate) ++flagged;
  }
  if (flagged)
    warnings.push_back(std::string("sparseness of ") + label + ": " + std::to_string(flagged) +
                       " zero or length-1 vector(s) scored 0");
  return total / static_cast<double>(oriented.rows());
}

}  // namespace

SparsenessResult sparseness(const FactorModel& model, SparsenessAxis axis) {
  SparsenessResult r;
  r.w = mean_sparseness(model.w, axis, "W", r.warnings);
  r.h = mean_sparseness(model.h, axis, "H", r.warnings);
  return r;
}

FeatureScores feature_scores(const Dense& w) {
  const std::size_t k = w.cols();
  if (k < 2) throw Error("rank", "feature scores need at least two basis vectors");
  FeatureScores out;
  out.scores.resize(w.rows(), 0.0);
  const double inv_log2k = 1.0 / std::log2(static_cast<double>(k));
  std::size_t zero_rows = 0;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    double total = 0.0;
    for (double x : w.row(i)) total += x;
    if (!(total > 0.0)) {
      ++zero_rows;
      continue;
    }
    const auto row = w.row(i);
    if (std::all_of(row.begin(), row.end(), [&](double x) { return x == row[0]; })) continue;
    double entropy = 0.0;
    for (double x : w.row(i)) {
      const double p = x / total;
      if (p > 0.0) entropy += p * std::log2(p);
    }
    out.scores[i] = std::clamp(1.0 + inv_log2k * entropy, 0.0, 1.0);
  }
  if (zero_rows)
    out.warnings.push_back("feature scores: " + std::to_string(zero_rows) +
                           " all-zero row(s) scored 0");
  return out;
}

std::vector<std::size_t> select_features(const std::vector<double>& scores, double n_sigma) {
  if (scores.empty()) return {};
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  const double sd = std::sqrt(var / static_cast<double>(scores.size()));
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] > mean + n_sigma * sd) picked.push_back(i);
  return picked;
}

std::vector<std::size_t> dominant_rows(const Dense& h) {
  std::vector<std::size_t> out(h.cols(), 0);
  for (std::size_t j = 0; j < h.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < h.rows(); ++a)
      if (h(a, j) > h(best, j)) best = a;
    out[j] = best;
  }
  return out;
}

Dense connectivity(const Dense& h) {
  const auto label = dominant_rows(h);
  const std::size_t n = label.size();
  Dense c(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = label[i] == label[j] ? 1.0 : 0.0;
  return c;
}

void ConsensusAccumulator::add(const Dense& conn) {
  if (conn.rows() != sum_.rows() || conn.cols() != sum_.cols())
    throw Error("shape", "connectivity matrix size does not match the accumulator");
  sum_ = nmfkit::add(sum_, conn);
  ++runs_;
}

void ConsensusAccumulator::merge(const ConsensusAccumulator& other) {
  if (other.samples() != samples()) throw Error("shape", "cannot merge accumulators of different size");
  sum_ = nmfkit::add(sum_, other.sum_);
  runs_ += other.runs_;
}

Dense ConsensusAccumulator::consensus() const {
  if (runs_ == 0) throw Error("degenerate", "consensus of zero runs");
  return scale(sum_, 1.0 / static_cast<double>(runs_));
}

double dispersion(const Dense& c) {
  const double n = static_cast<double>(c.rows());
  if (c.rows() == 0) throw Error("degenerate", "dispersion of an empty matrix");
  double s = 0.0;
  for (double x : c.values()) s += 4.0 * (x - 0.5) * (x - 0.5);
  return s / (n * n);
}

Dense average_linkage_cophenetic(const Dense& d) {
  const std::size_t n = d.rows();
  if (d.cols() != n) throw Error("shape", "distance matrix must be square");
  Dense dist = d;
  Dense coph(n, n);
  std::vector<std::vector<std::size_t>> members(n);
  std::vector<bool> active(n, true);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};

  for (std::size_t merges = 1; merges < n; ++merges) {
    std::size_t bi = 0;
    std::size_t bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (active[j] && dist(i, j) < best) {
          best = dist(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    for (std::size_t p : members[bi]) {
      for (std::size_t q : members[bj]) {
        coph(p, q) = best;
        coph(q, p) = best;
      }
    }
    const double si = static_cast<double>(members[bi].size());
    const double sj = static_cast<double>(members[bj].size());
    for (std::size_t l = 0; l < n; ++l) {
      if (!active[l] || l == bi || l == bj) continue;
      const double merged = (si * dist(bi, l) + sj * dist(bj, l)) / (si + sj);
      dist(bi, l) = merged;
      dist(l, bi) = merged;
    }
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    members[bj].clear();
    active[bj] = false;
  }
  return coph;
}

double cophenetic(const Dense& consensus) {
  const std::size_t n = consensus.rows();
  if (consensus.cols() != n) throw Error("shape", "consensus matrix must be square");
  if (n < 3) throw Error("degenerate", "cophenetic correlation needs at least 3 samples");
  Dense d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d(i, j) = i == j ? 0.0 : 1.0 - consensus(i, j);
  const Dense c = average_linkage_cophenetic(d);

  const double count = static_cast<double>(n * (n - 1) / 2);
  double md = 0.0;
  double mc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      md += d(i, j);
      mc += c(i, j);
    }
  md /= count;
  mc /= count;
  double sdd = 0.0;
  double scc = 0.0;
  double sdc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double a = d(i, j) - md;
      const double b = c(i, j) - mc;
      sdd += a * a;
      scc += b * b;
      sdc += a * b;
    }
  // Constant distances are reproduced exactly by the dendrogram.
  if (sdd == 0.0 && scc == 0.0) return 1.0;
  if (sdd == 0.0 || scc == 0.0) return 0.0;
  return std::clamp(sdc / std::sqrt(sdd * scc), -1.0, 1.0);
}

FitSummary summarize(const DataMatrix& v, const FactorModel& model, SparsenessAxis axis) {
  FitSummary s;
  const Dense r = model.reconstruction();
  s.rss = residual_sq(v, r);
  const double total = frobenius_sq(v);
  if (!(total > 0.0)) throw Error("degenerate", "explained variance undefined for an all-zero V");
  s.evar = 1.0 - s.rss / total;
  s.dist_euclidean = std::sqrt(s.rss);
  s.dist_kl = kl_objective(v, r);
  SparsenessResult sp = sparseness(model, axis);
  s.sparseness_w = sp.w;
  s.sparseness_h = sp.h;
  s.warnings = std::move(sp.warnings);
  s.n_iter = model.n_iter;
  s.final_objective = model.final_objective;
  return s;
}

}  // namespace nmfkit
