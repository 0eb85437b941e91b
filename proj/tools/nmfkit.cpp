// nmfkit command-line driver: factorize, rank-estimate, synth, convert.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nmfkit/error.hpp"
#include "nmfkit/factor.hpp"
#include "nmfkit/mio.hpp"
#include "nmfkit/multirun.hpp"
#include "nmfkit/quality.hpp"

namespace fs = std::filesystem;
using namespace nmfkit;

namespace {

// Flag misuse detected after CLI11 accepted the command line.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FactorFlags {
  std::string input;
  std::string method;
  std::size_t rank = 0;
  std::string seed = "random_vcol";
  std::size_t max_iter = 200;
  double min_residual_delta = 1e-5;
  std::size_t conn_change = 30;
  bool track_error = false;
  std::uint64_t master_seed = 0;
  bool scale_unit = false;
  bool allow_negative = false;
  std::vector<std::string> params;
  std::string fixed_w;
  std::string fixed_h;
  std::string sparseness_axis = "columns";
  std::string output_dir = "out";
};

void add_factor_flags(CLI::App* cmd, FactorFlags& f) {
  cmd->add_option("--input", f.input, "Data matrix V (.mtx or .csv)")->required();
  cmd->add_option("--method", f.method,
                  "nmf-eu, nmf-kl, lsnmf, snmf-l, snmf-r, nsnmf, bmf, bd or icm")
      ->required();
  cmd->add_option("--seed", f.seed,
                  "Seeding: random, fixed, random_c, random_vcol, nndsvd, nndsvda, nndsvdar")
      ->capture_default_str();
  cmd->add_option("--max-iter", f.max_iter, "Iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--min-residual-delta", f.min_residual_delta,
                  "Relative objective improvement below which iteration stops (0 disables)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--conn-change", f.conn_change,
                  "Stop after this many iterations with unchanged connectivity (0 disables)")
      ->capture_default_str();
  cmd->add_flag("--track-error", f.track_error, "Record the objective of every iteration");
  cmd->add_option("--master-seed", f.master_seed, "Seed for all randomness")->capture_default_str();
  cmd->add_flag("--scale-unit", f.scale_unit, "Divide V by its largest entry before fitting");
  cmd->add_flag("--allow-negative", f.allow_negative,
                "Accept negative entries when reading V (factorization still rejects them)");
  cmd->add_option("--param", f.params,
                  "Method or seeding parameter key=value; repeatable. Keys: theta, eta, beta, "
                  "lambda0, lambda_growth, lambda_period, lambda_max, alpha_rate, beta_rate, "
                  "sigma_shape, sigma_scale, burn_in, pg_tol, inner_max_iter, armijo_beta, "
                  "armijo_sigma, p_cols, p_rows, dense_fraction, seed_scale");
  cmd->add_option("--fixed-w", f.fixed_w, "Initial W for --seed fixed");
  cmd->add_option("--fixed-h", f.fixed_h, "Initial H for --seed fixed");
  cmd->add_option("--sparseness-axis", f.sparseness_axis, "Average sparseness over columns or rows")
      ->check(CLI::IsMember({"columns", "rows"}))
      ->capture_default_str();
  cmd->add_option("--output-dir", f.output_dir, "Directory for output files")->capture_default_str();
}

template <typename F>
auto as_usage(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

FactorConfig build_config(const FactorFlags& f) {
  FactorConfig c;
  as_usage([&] {
    c.method = parse_method(f.method);
    c.seed = SeedSpec::parse(f.seed);
    return 0;
  });
  c.rank = f.rank;
  c.max_iter = f.max_iter;
  c.min_residual_delta = f.min_residual_delta;
  c.conn_change = f.conn_change;
  c.track_error = f.track_error;
  c.master_seed = f.master_seed;
  for (const std::string& kv : f.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("--param expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string text = kv.substr(eq + 1);
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size())
      throw UsageError("--param " + key + ": '" + text + "' is not a number");
    as_usage([&] {
      apply_param(c, key, value);
      return 0;
    });
  }
  as_usage([&] {
    c.params.validate();
    return 0;
  });
  if (c.seed.kind == SeedKind::fixed && (f.fixed_w.empty() || f.fixed_h.empty()))
    throw UsageError("--seed fixed requires --fixed-w and --fixed-h");
  return c;
}

DataMatrix load_input(const FactorFlags& f) {
  DataMatrix v = read_matrix(f.input, std::nullopt, f.allow_negative);
  if (f.scale_unit) {
    const double top = v.max_value();
    if (top > 0.0) v = v.scaled(1.0 / top);
  }
  return v;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("io", "cannot create directory '" + dir + "'");
}

std::string in_dir(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

int cmd_factorize(const FactorFlags& f, bool timing) {
  if (f.rank < 1) throw UsageError("--rank must be >= 1");
  FactorConfig cfg = build_config(f);
  const SparsenessAxis axis = parse_sparseness_axis(f.sparseness_axis);
  const DataMatrix v = load_input(f);
  if (cfg.seed.kind == SeedKind::fixed) {
    cfg.seed.fixed_w = read_matrix(f.fixed_w).to_dense();
    cfg.seed.fixed_h = read_matrix(f.fixed_h).to_dense();
  }

  const auto start = std::chrono::steady_clock::now();
  const FactorResult res = factorize(v, cfg);
  const FitSummary s = summarize(v, res.model, axis);
  const auto elapsed = std::chrono::steady_clock::now() - start;

  SummaryDocument doc;
  doc.method = std::string(method_name(cfg.method));
  doc.rank = cfg.rank;
  doc.seed_method = cfg.seed.name();
  doc.n_iter = res.model.n_iter;
  doc.max_iter = cfg.max_iter;
  doc.rss = s.rss;
  doc.evar = s.evar;
  doc.dist_euclidean = s.dist_euclidean;
  doc.dist_kl = s.dist_kl;
  doc.sparseness_w = s.sparseness_w;
  doc.sparseness_h = s.sparseness_h;
  if (cfg.track_error) doc.objective_trace = res.trace.objective;
  doc.warnings = s.warnings;
  if (timing)
    doc.timing_ms = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();

  ensure_dir(f.output_dir);
  write_matrix(res.model.w, in_dir(f.output_dir, "W.mtx"), MatrixFormat::mtx);
  write_matrix(res.model.h, in_dir(f.output_dir, "H.mtx"), MatrixFormat::mtx);
  write_summary(doc, in_dir(f.output_dir, "summary.json"));

  for (const auto& w : s.warnings) std::cerr << "nmfkit: warning: " << w << "\n";
  std::printf("Rss: %5.4f, Evar: %5.4f\n", s.rss, s.evar);
  std::printf("K-L divergence: %5.4f\n", s.dist_kl);
  std::printf("Sparseness, W: %5.4f, H: %5.4f\n", s.sparseness_w, s.sparseness_h);
  std::printf("Iterations: %zu\n", res.model.n_iter);
  return 0;
}

int cmd_rank_estimate(FactorFlags f, const std::string& ranks, std::size_t runs,
                      std::optional<std::size_t> threads) {
  f.rank = 1;
  RankSweepConfig sweep;
  sweep.base = build_config(f);
  if (sweep.base.seed.kind == SeedKind::fixed)
    throw UsageError("rank-estimate needs a randomized seeding method");
  sweep.ranks = as_usage([&] { return parse_ranks(ranks); });
  sweep.runs_per_rank = runs;
  sweep.master_seed = f.master_seed;
  sweep.threads = threads.value_or(default_threads());
  const DataMatrix v = load_input(f);

  const ConsensusReport report = rank_sweep(v, sweep);
  ensure_dir(f.output_dir);
  write_text(in_dir(f.output_dir, "consensus_report.json"), report_json(report));
  write_text(in_dir(f.output_dir, "consensus_report.csv"), report_csv(report));
  for (const auto& w : report.warnings) std::cerr << "nmfkit: warning: " << w << "\n";
  std::printf("Recommended rank: %zu\n", report.recommended_rank);
  return 0;
}

struct SynthFlags {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t rank = 0;
  double noise = 0.0;
  double density = 1.0;
  std::uint64_t seed = 0;
  std::string output = "out";
  bool emit_truth = false;
};

int cmd_synth(const SynthFlags& f) {
  const SynthData d = as_usage([&] { return synth(f.rows, f.cols, f.rank, f.noise, f.density, f.seed); });
  ensure_dir(f.output);
  write_matrix(d.v, in_dir(f.output, "V.mtx"), MatrixFormat::mtx);
  if (f.emit_truth) {
    write_matrix(d.w, in_dir(f.output, "W_true.mtx"), MatrixFormat::mtx);
    write_matrix(d.h, in_dir(f.output, "H_true.mtx"), MatrixFormat::mtx);
  }
  return 0;
}

int cmd_convert(const std::string& input, const std::string& output, const std::string& to) {
  const DataMatrix m = read_matrix(input, std::nullopt, true);
  write_matrix(m, output, parse_format(to));
  return 0;
}

int usage_exit(const CLI::App& app, const CLI::ParseError& e) {
  if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e);
  std::cerr << "nmfkit: " << e.what() << "\n\n";
  const CLI::App* shown = &app;
  for (const CLI::App* sub : app.get_subcommands()) shown = sub;
  std::cerr << shown->help();
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nmfkit: nonnegative matrix factorization"};
  app.require_subcommand(1);

  FactorFlags fz;
  bool timing = false;
  CLI::App* factorize_cmd = app.add_subcommand("factorize", "Fit one factorization V ~ W H");
  add_factor_flags(factorize_cmd, fz);
  factorize_cmd->add_option("--rank", fz.rank, "Factorization rank")->required();
  factorize_cmd->add_flag("--timing", timing, "Record wall-clock time in summary.json");

  FactorFlags re;
  std::string ranks;
  std::size_t runs = 0;
  std::optional<std::size_t> threads;
  CLI::App* rank_cmd =
      app.add_subcommand("rank-estimate", "Multi-run consensus over candidate ranks");
  add_factor_flags(rank_cmd, re);
  rank_cmd->add_option("--ranks", ranks, "Candidate ranks: A..B or a,b,c")->required();
  rank_cmd->add_option("--runs", runs, "Runs per rank")->required()->check(CLI::PositiveNumber);
  rank_cmd->add_option("--threads", threads,
                       "Worker threads (default: NMFKIT_THREADS or available cores)")
      ->check(CLI::PositiveNumber);

  SynthFlags sy;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Write a block-structured synthetic V.mtx");
  synth_cmd->add_option("--rows", sy.rows, "Rows of V")->required();
  synth_cmd->add_option("--cols", sy.cols, "Columns of V")->required();
  synth_cmd->add_option("--rank", sy.rank, "Number of blocks")->required();
  synth_cmd->add_option("--noise", sy.noise, "Gaussian noise standard deviation")->capture_default_str();
  synth_cmd->add_option("--density", sy.density, "Fraction of entries kept")->capture_default_str();
  synth_cmd->add_option("--seed", sy.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--output", sy.output, "Output directory")->capture_default_str();
  synth_cmd->add_flag("--emit-truth", sy.emit_truth, "Also write W_true.mtx and H_true.mtx");

  std::string cv_in;
  std::string cv_out;
  std::string cv_to;
  CLI::App* convert_cmd = app.add_subcommand("convert", "Transcode a matrix between mtx and csv");
  convert_cmd->add_option("--input", cv_in, "Source matrix")->required();
  convert_cmd->add_option("--output", cv_out, "Destination path")->required();
  convert_cmd->add_option("--to", cv_to, "Target format")
      ->required()
      ->check(CLI::IsMember({"mtx", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return usage_exit(app, e);
  }

  try {
    if (*factorize_cmd) return cmd_factorize(fz, timing);
    if (*rank_cmd) return cmd_rank_estimate(re, ranks, runs, threads);
    if (*synth_cmd) return cmd_synth(sy);
    if (*convert_cmd) return cmd_convert(cv_in, cv_out, cv_to);
  } catch (const UsageError& e) {
    std::cerr << "nmfkit: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "nmfkit: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "nmfkit: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
