#pragma once

// Repeated factorizations for stability analysis and rank estimation.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nmfkit/factor.hpp"
#include "nmfkit/matrix.hpp"

namespace nmfkit {

struct MultiRunResult {
  std::vector<FactorModel> models;  // in run-index order
  Dense consensus;
};

/// Seed of run `run` at rank `rank`: derive_seed(master, rank, run).
std::uint64_t run_seed(std::uint64_t master, std::size_t rank, std::size_t run) noexcept;

/// Default worker count: NMFKIT_THREADS if set and positive, otherwise the
/// hardware concurrency (at least 1).
std::size_t default_threads();

/// Runs `runs` factorizations of V with config (master_seed replaced per
/// run) on up to `threads` workers. The first failing run, by index, is
/// rethrown. Output does not depend on `threads`.
MultiRunResult run_many(const DataMatrix& v, const FactorConfig& config, std::size_t runs,
                        std::uint64_t master_seed, std::size_t threads = 1);

struct RankSweepConfig {
  std::vector<std::size_t> ranks;
  std::size_t runs_per_rank = 10;
  FactorConfig base;  // rank is ignored
  std::uint64_t master_seed = 0;
  std::size_t threads = 1;
};

struct RankRecord {
  std::size_t rank = 0;
  double cophenetic = 0.0;
  double dispersion = 0.0;
  double mean_rss = 0.0;
  double mean_evar = 0.0;
  double mean_n_iter = 0.0;
};

struct ConsensusReport {
  std::vector<RankRecord> records;
  std::size_t recommended_rank = 0;
  std::vector<std::string> warnings;
};

/// Parses `A..B` or `a,b,c` into a rank list. Error("param") when malformed.
std::vector<std::size_t> parse_ranks(const std::string& text);

/// Error("rank") for ranks outside [1, min(m, n)], Error("param") for an
/// empty rank list or zero runs. A single run per rank is accepted with a
/// warning.
ConsensusReport rank_sweep(const DataMatrix& v, const RankSweepConfig& sweep);

}  // namespace nmfkit
