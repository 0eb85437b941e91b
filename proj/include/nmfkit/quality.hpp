#pragma once

// Fit diagnostics over (V, model) plus the clustering-stability measures used
// for multi-run rank selection.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "nmfkit/factor.hpp"
#include "nmfkit/matrix.hpp"

namespace nmfkit {

double rss(const DataMatrix& v, const FactorModel& model);
/// 1 - rss / sum V^2. Throws Error("degenerate") for an all-zero V.
double evar(const DataMatrix& v, const FactorModel& model);

enum class Metric { euclidean, kl };
/// Throws Error("metric") for anything but "euclidean" / "kl".
Metric parse_metric(std::string_view name);
/// euclidean: sqrt(rss); kl: divergence of V from the reconstruction.
double distance(const DataMatrix& v, const FactorModel& model, Metric metric);

/// Hoyer sparseness of one vector. Vectors shorter than 2 or all-zero
/// score 0 and set `degenerate` when supplied.
double hoyer_sparseness(std::span<const double> x, bool* degenerate = nullptr);

enum class SparsenessAxis { columns, rows };
SparsenessAxis parse_sparseness_axis(std::string_view name);

struct SparsenessResult {
  double w = 0.0;
  double h = 0.0;
  std::vector<std::string> warnings;
};

/// Mean Hoyer sparseness over the columns (default) or rows of W and of H.
SparsenessResult sparseness(const FactorModel& model,
                            SparsenessAxis axis = SparsenessAxis::columns);

struct FeatureScores {
  std::vector<double> scores;  // one per row of W
  std::vector<std::string> warnings;
};

/// Entropy-based specificity of each row of W to the basis vectors.
/// Throws Error("rank") when W has a single column.
FeatureScores feature_scores(const Dense& w);
/// Row indices whose score exceeds mean + n_sigma * (population) std.
std::vector<std::size_t> select_features(const std::vector<double>& scores,
                                         double n_sigma = 3.0);

/// Index of each column's largest entry (ties: lowest row).
std::vector<std::size_t> dominant_rows(const Dense& h);
/// n x n indicator of shared dominant row.
Dense connectivity(const Dense& h);

/// Running sum of connectivity matrices.
class ConsensusAccumulator {
 public:
  explicit ConsensusAccumulator(std::size_t n) : sum_(n, n) {}

  void add(const Dense& connectivity);
  void merge(const ConsensusAccumulator& other);

  std::size_t samples() const noexcept { return sum_.rows(); }
  std::size_t runs() const noexcept { return runs_; }
  const Dense& sum() const noexcept { return sum_; }
  /// sum / runs; Error("degenerate") when no run was added.
  Dense consensus() const;

 private:
  Dense sum_;
  std::size_t runs_ = 0;
};

/// (1/n^2) sum_ij 4 (C_ij - 1/2)^2
double dispersion(const Dense& consensus);

/// Cophenetic distances of an average-linkage dendrogram built on the n x n
/// distance matrix d. Merge ties break toward the lowest cluster index.
Dense average_linkage_cophenetic(const Dense& d);

/// Pearson correlation between the upper triangle of 1 - consensus and the
/// average-linkage cophenetic distances. Error("degenerate") for n < 3.
double cophenetic(const Dense& consensus);

/// Summary of one fitted model, mirroring the printed measures of a run.
struct FitSummary {
  double rss = 0.0;
  double evar = 0.0;
  double dist_euclidean = 0.0;
  double dist_kl = 0.0;
  double sparseness_w = 0.0;
  double sparseness_h = 0.0;
  std::size_t n_iter = 0;
  double final_objective = 0.0;
  std::vector<std::string> warnings;
};

FitSummary summarize(const DataMatrix& v, const FactorModel& model,
                     SparsenessAxis axis = SparsenessAxis::columns);

}  // namespace nmfkit
