#include <doctest.h>

#include <cstdlib>

#include "nmfkit/mio.hpp"
#include "nmfkit/multirun.hpp"
#include "nmfkit/quality.hpp"
#include "support.hpp"

using namespace nmfkit;
using testing::error_kind;

namespace {

FactorConfig kl_config() {
  FactorConfig c;
  c.method = Method::nmf_kl;
  c.rank = 3;
  c.max_iter = 60;
  return c;
}

}  // namespace

TEST_CASE("single run consensus is its connectivity") {
  const DataMatrix v = synth(12, 9, 3, 0.01, 1.0, 4).v;
  const MultiRunResult r = run_many(v, kl_config(), 1, 5);
  REQUIRE(r.models.size() == 1);
  CHECK(r.consensus == connectivity(r.models[0].h));
}

TEST_CASE("run_many is deterministic across schedules") {
  const DataMatrix v = synth(15, 12, 3, 0.01, 1.0, 8).v;
  const MultiRunResult serial = run_many(v, kl_config(), 8, 42, 1);
  const MultiRunResult again = run_many(v, kl_config(), 8, 42, 1);
  const MultiRunResult parallel = run_many(v, kl_config(), 8, 42, 4);
  CHECK(serial.consensus == again.consensus);
  CHECK(serial.consensus == parallel.consensus);
  for (std::size_t i = 0; i < 8; ++i) CHECK(serial.models[i].w == parallel.models[i].w);
  CHECK(serial.models[0].w != serial.models[1].w);
  const Dense& c = serial.consensus;
  CHECK(c == transpose(c));
  for (std::size_t i = 0; i < c.rows(); ++i) CHECK(c(i, i) == 1.0);
  CHECK(error_kind([&] { run_many(v, kl_config(), 0, 1); }) == "param");
}

TEST_CASE("failing run aborts the batch") {
  const DataMatrix v = synth(6, 5, 2, 0.0, 1.0, 1).v;
  FactorConfig c = kl_config();
  c.rank = 9;
  CHECK(error_kind([&] { run_many(v, c, 3, 1, 2); }) == "rank");
}

TEST_CASE("rank lists") {
  CHECK(parse_ranks("2..5") == std::vector<std::size_t>{2, 3, 4, 5});
  CHECK(parse_ranks("3,7,4") == std::vector<std::size_t>{3, 7, 4});
  CHECK(parse_ranks("6") == std::vector<std::size_t>{6});
  for (const char* bad : {"", "5..2", "a", "1,,2", "2..", "-1"})
    CHECK(error_kind([&] { parse_ranks(bad); }) == "param");
}

TEST_CASE("rank sweep report") {
  const DataMatrix v = synth(15, 12, 3, 0.01, 1.0, 3).v;
  RankSweepConfig s;
  s.ranks = {3};
  s.runs_per_rank = 5;
  s.base = kl_config();
  const ConsensusReport one = rank_sweep(v, s);
  CHECK(one.records.size() == 1);
  CHECK(one.recommended_rank == 3u);

  s.ranks = {2, 3, 4};
  s.threads = 3;
  const ConsensusReport many = rank_sweep(v, s);
  s.threads = 1;
  CHECK(report_csv(rank_sweep(v, s)) == report_csv(many));
  CHECK(many.records.size() == 3);
  for (const auto& r : many.records) {
    CHECK(r.cophenetic >= -1.0);
    CHECK(r.cophenetic <= 1.0);
    CHECK(r.dispersion >= 0.0);
    CHECK(r.dispersion <= 1.0);
    CHECK(r.mean_evar <= 1.0);
    CHECK(r.mean_n_iter >= 1.0);
  }
  bool found = false;
  for (const auto& r : many.records) found = found || r.rank == many.recommended_rank;
  CHECK(found);

  s.runs_per_rank = 1;
  const ConsensusReport single = rank_sweep(v, s);
  CHECK(single.warnings.size() == 1);
  for (const auto& r : single.records) CHECK(r.dispersion == 1.0);

  s.ranks = {13};
  CHECK(error_kind([&] { rank_sweep(v, s); }) == "rank");
  s.ranks = {};
  CHECK(error_kind([&] { rank_sweep(v, s); }) == "param");
}

TEST_CASE("recommended rank ties break toward the smallest rank") {
  // Perfectly separated blocks: every rank clusters crisply.
  Dense vd(6, 6);
  for (std::size_t i = 0; i < 6; ++i) vd(i, i) = 1.0;
  RankSweepConfig s;
  s.ranks = {3, 2};
  s.runs_per_rank = 2;
  s.base = kl_config();
  const ConsensusReport r = rank_sweep(DataMatrix(vd), s);
  if (r.records[0].cophenetic == r.records[1].cophenetic) CHECK(r.recommended_rank == 2u);
}

TEST_CASE("thread default honours the environment") {
  ::setenv("NMFKIT_THREADS", "3", 1);
  CHECK(default_threads() == 3u);
  ::setenv("NMFKIT_THREADS", "zero", 1);
  CHECK(default_threads() >= 1u);
  ::unsetenv("NMFKIT_THREADS");
  CHECK(default_threads() >= 1u);
}
