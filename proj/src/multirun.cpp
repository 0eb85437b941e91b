#include "nmfkit/multirun.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>

#include "nmfkit/error.hpp"
#include "nmfkit/quality.hpp"
#include "nmfkit/rng.hpp"

namespace nmfkit {

std::uint64_t run_seed(std::uint64_t master, std::size_t rank, std::size_t run) noexcept {
  return derive_seed(master, rank, run);
}

std::size_t default_threads() {
  if (const char* env = std::getenv("NMFKIT_THREADS")) {
    char* end = nullptr;
    const unsigned long long n = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

MultiRunResult run_many(const DataMatrix& v, const FactorConfig& config, std::size_t runs,
                        std::uint64_t master_seed, std::size_t threads) {
  if (runs == 0) throw Error("param", "runs must be >= 1");
  std::vector<FactorModel> models(runs);
  std::vector<std::exception_ptr> errors(runs);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < runs; i = next++) {
      try {
        FactorConfig c = config;
        c.master_seed = run_seed(master_seed, config.rank, i);
        c.track_error = false;
        c.track_factors = 0;
        models[i] = factorize(v, c).model;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t pool = std::clamp<std::size_t>(threads, 1, runs);
  if (pool == 1) {
    worker();
  } else {
    std::vector<std::thread> workers;
    workers.reserve(pool);
    for (std::size_t t = 0; t < pool; ++t) workers.emplace_back(worker);
    for (auto& t : workers) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ConsensusAccumulator acc(v.cols());
  for (const auto& m : models) acc.add(connectivity(m.h));
  return {std::move(models), acc.consensus()};
}

std::vector<std::size_t> parse_ranks(const std::string& text) {
  auto parse_one = [&](const std::string& s) -> std::size_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw Error("param", "bad rank list '" + text + "'");
    return static_cast<std::size_t>(std::stoull(s));
  };
  std::vector<std::size_t> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const std::size_t lo = parse_one(text.substr(0, dots));
    const std::size_t hi = parse_one(text.substr(dots + 2));
    if (lo > hi) throw Error("param", "empty rank range '" + text + "'");
    for (std::size_t r = lo; r <= hi; ++r) out.push_back(r);
    return out;
  }
  std::size_t start = 0;
  for (;;) {
    const auto comma = text.find(',', start);
    out.push_back(parse_one(text.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

ConsensusReport rank_sweep(const DataMatrix& v, const RankSweepConfig& sweep) {
  if (sweep.ranks.empty()) throw Error("param", "no ranks requested");
  if (sweep.runs_per_rank == 0) throw Error("param", "runs per rank must be >= 1");
  const std::size_t limit = std::min(v.rows(), v.cols());
  for (std::size_t r : sweep.ranks)
    if (r < 1 || r > limit)
      throw Error("rank", "rank " + std::to_string(r) + " outside [1, " + std::to_string(limit) + "]");

  ConsensusReport report;
  if (sweep.runs_per_rank == 1)
    report.warnings.push_back("single run per rank: consensus is one connectivity matrix");

  const double total = frobenius_sq(v);
  for (std::size_t r : sweep.ranks) {
    FactorConfig c = sweep.base;
    c.rank = r;
    const MultiRunResult mr = run_many(v, c, sweep.runs_per_rank, sweep.master_seed, sweep.threads);
    RankRecord rec;
    rec.rank = r;
    rec.cophenetic = cophenetic(mr.consensus);
    rec.dispersion = dispersion(mr.consensus);
    for (const auto& m : mr.models) {
      const double res = rss(v, m);
      rec.mean_rss += res;
      rec.mean_evar += total > 0.0 ? 1.0 - res / total : 0.0;
      rec.mean_n_iter += static_cast<double>(m.n_iter);
    }
    const double runs = static_cast<double>(mr.models.size());
    rec.mean_rss /= runs;
    rec.mean_evar /= runs;
    rec.mean_n_iter /= runs;
    report.records.push_back(rec);
  }
  if (!(total > 0.0)) report.warnings.push_back("all-zero V: mean_evar reported as 0");

  const RankRecord* best = &report.records.front();
  for (const auto& rec : report.records)
    if (rec.cophenetic > best->cophenetic ||
        (rec.cophenetic == best->cophenetic && rec.rank < best->rank))
      best = &rec;
  report.recommended_rank = best->rank;
  return report;
}

}  // namespace nmfkit
