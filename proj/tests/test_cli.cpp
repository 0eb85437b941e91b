#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "nmfkit/mio.hpp"

namespace fs = std::filesystem;
using nmfkit::read_matrix;
using nmfkit::read_text;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

const fs::path& tmp() {
  static const fs::path dir = [] {
    fs::remove_all(NMFKIT_TEST_TMP);
    fs::create_directories(NMFKIT_TEST_TMP);
    return fs::path(NMFKIT_TEST_TMP);
  }();
  return dir;
}

Run cli(const std::string& args) {
  const std::string out = (tmp() / "stdout.txt").string();
  const std::string err = (tmp() / "stderr.txt").string();
  const std::string cmd = std::string(NMFKIT_CLI) + " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text(out), read_text(err)};
}

std::string p(const std::string& name) { return (tmp() / name).string(); }

std::string make_input() {
  static const bool made = [] {
    REQUIRE(cli("synth --rows 20 --cols 10 --rank 3 --noise 0 --seed 5 --output " + p("data")).code == 0);
    return true;
  }();
  (void)made;
  return p("data/V.mtx");
}

}  // namespace

TEST_CASE("help documents every flag") {
  CHECK(cli("--help").code == 0);
  const Run f = cli("factorize --help");
  CHECK(f.code == 0);
  for (const char* flag : {"--input", "--method", "--rank", "--seed", "--max-iter", "--output-dir",
                           "--track-error", "--master-seed", "--scale-unit", "--param",
                           "--min-residual-delta", "--conn-change", "--sparseness-axis",
                           "--allow-negative", "--fixed-w", "--fixed-h", "--timing"})
    CHECK(f.out.find(flag) != std::string::npos);
  const Run r = cli("rank-estimate --help");
  CHECK(r.code == 0);
  for (const char* flag : {"--ranks", "--runs", "--threads", "--input", "--method"})
    CHECK(r.out.find(flag) != std::string::npos);
  const Run s = cli("synth --help");
  CHECK(s.code == 0);
  for (const char* flag : {"--rows", "--cols", "--rank", "--noise", "--density", "--seed",
                           "--output", "--emit-truth"})
    CHECK(s.out.find(flag) != std::string::npos);
  const Run c = cli("convert --help");
  CHECK(c.code == 0);
  for (const char* flag : {"--input", "--output", "--to"}) CHECK(c.out.find(flag) != std::string::npos);
}

TEST_CASE("factorize writes factors and a summary") {
  const std::string v = make_input();
  const Run r = cli("factorize --input " + v +
                    " --method lsnmf --rank 3 --max-iter 300 --track-error --output-dir " + p("fit"));
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("Rss: ", 0) == 0);
  CHECK(r.out.find("K-L divergence: ") != std::string::npos);
  CHECK(r.out.find("Sparseness, W: ") != std::string::npos);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 4);
  CHECK(read_matrix(p("fit/W.mtx")).to_dense().cols() == 3);
  CHECK(read_matrix(p("fit/H.mtx")).to_dense().rows() == 3);
  const auto j = nlohmann::json::parse(read_text(p("fit/summary.json")));
  CHECK(j["evar"].get<double>() >= 0.999);
  CHECK(j["method"] == "lsnmf");
  CHECK(j["objective_trace"].size() == j["n_iter"].get<std::size_t>());
  CHECK(j["timing_ms"] == 0);
}

TEST_CASE("exit codes") {
  const std::string v = make_input();
  CHECK(cli("factorize --input " + v + " --method lsnmf --rank 0").code == 2);
  const Run missing = cli("factorize --input " + p("absent.mtx") + " --method lsnmf --rank 2");
  CHECK(missing.code == 1);
  CHECK(missing.err.find("absent.mtx") != std::string::npos);
  const Run unknown = cli("factorize --input " + v + " --method lsnmf --rank 2 --bogus");
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("--input") != std::string::npos);
  CHECK(cli("factorize --input " + v + " --method magic --rank 2").code == 2);
  CHECK(cli("factorize --input " + v + " --method lsnmf --rank 2 --param nope=1").code == 2);
  CHECK(cli("factorize --input " + v + " --method lsnmf --rank 2 --param theta=x").code == 2);
  CHECK(cli("factorize --input " + v + " --method lsnmf --rank 2 --seed kmeans").code == 2);
  CHECK(cli("factorize --method lsnmf --rank 2").code == 2);
  CHECK(cli("factorize --input " + v + " --method lsnmf --rank 11 --output-dir " + p("x")).code == 1);
  CHECK(cli("").code == 2);
  CHECK(cli("transmogrify").code == 2);
  CHECK(cli("convert --input " + v + " --output " + p("v.h5") + " --to h5").code == 2);
  CHECK(cli("synth --rows 3 --cols 3 --rank 4 --output " + p("bad")).code == 2);
}

TEST_CASE("rank estimate") {
  const std::string v = make_input();
  const std::string base = "rank-estimate --input " + v + " --method nmf-kl --ranks 2..4 --runs 3 ";
  REQUIRE(cli(base + "--master-seed 42 --threads 1 --output-dir " + p("re1")).code == 0);
  const Run second = cli(base + "--master-seed 42 --threads 3 --output-dir " + p("re2"));
  REQUIRE(second.code == 0);
  CHECK(second.out.rfind("Recommended rank: ", 0) == 0);
  const std::string csv = read_text(p("re1/consensus_report.csv"));
  CHECK(csv == read_text(p("re2/consensus_report.csv")));
  CHECK(read_text(p("re1/consensus_report.json")) == read_text(p("re2/consensus_report.json")));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto j = nlohmann::json::parse(read_text(p("re1/consensus_report.json")));
  CHECK(j["records"].size() == 3);

  const Run single = cli("rank-estimate --input " + v +
                         " --method nmf-kl --ranks 2,3 --runs 1 --output-dir " + p("re3"));
  CHECK(single.code == 0);
  CHECK(single.err.find("warning") != std::string::npos);
  const auto s = nlohmann::json::parse(read_text(p("re3/consensus_report.json")));
  CHECK(s["warnings"].size() == 1);
  for (const auto& rec : s["records"]) CHECK(rec["cophenetic"].is_number());

  CHECK(cli("rank-estimate --input " + v + " --method nmf-kl --ranks 5..2 --runs 2").code == 2);
  CHECK(cli("rank-estimate --input " + v + " --method nmf-kl --ranks 2..3 --runs 0").code == 2);
}

TEST_CASE("synth and convert") {
  REQUIRE(cli("synth --rows 12 --cols 8 --rank 2 --noise 0.05 --density 0.5 --seed 3 --emit-truth --output " +
              p("sy"))
              .code == 0);
  CHECK(fs::exists(p("sy/W_true.mtx")));
  CHECK(fs::exists(p("sy/H_true.mtx")));
  const auto v = read_matrix(p("sy/V.mtx"));
  CHECK(v.is_sparse());

  REQUIRE(cli("convert --input " + p("sy/V.mtx") + " --output " + p("sy/V.csv") + " --to csv").code == 0);
  REQUIRE(cli("convert --input " + p("sy/V.csv") + " --output " + p("sy/V2.mtx") + " --to mtx").code == 0);
  const nmfkit::Dense a = v.to_dense();
  const nmfkit::Dense b = read_matrix(p("sy/V2.mtx")).to_dense();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.values()[i] - b.values()[i]) <= 1e-15);
}

TEST_CASE("noise-free synthetic data factorizes at its rank") {
  const std::string v = make_input();
  const Run r = cli("factorize --input " + v + " --method nmf-eu --rank 3 --max-iter 2000 --min-residual-delta 0 --conn-change 0 --output-dir " + p("eu"));
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(read_text(p("eu/summary.json")));
  CHECK(j["evar"].get<double>() >= 0.999);
}
