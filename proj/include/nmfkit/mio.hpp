#pragma once

// Matrix files (MatrixMarket, CSV), run summaries, consensus reports and the
// synthetic data generator.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nmfkit/matrix.hpp"
#include "nmfkit/multirun.hpp"

namespace nmfkit {

enum class MatrixFormat { mtx, csv };

/// "mtx" or "csv"; Error("param") otherwise.
MatrixFormat parse_format(std::string_view name);
std::string_view format_name(MatrixFormat f) noexcept;

/// MatrixMarket `coordinate real general` gives CSR, `array real general`
/// gives dense; CSV gives dense. Without a format the content is sniffed
/// (a `%%MatrixMarket` banner means mtx). Malformed input throws
/// Error("parse") naming the line; negative values throw Error("domain")
/// unless allow_negative; unreadable files throw Error("io").
DataMatrix read_matrix(const std::string& path, std::optional<MatrixFormat> format = std::nullopt,
                       bool allow_negative = false);
DataMatrix parse_matrix(std::string_view text, MatrixFormat format, bool allow_negative = false);

/// Dense input is written as an mtx array, CSR as mtx coordinate. CSV is
/// always written densely. Values use 17 significant digits.
void write_matrix(const DataMatrix& m, const std::string& path, MatrixFormat format);
std::string format_matrix(const DataMatrix& m, MatrixFormat format);

struct SummaryDocument {
  std::string method;
  std::size_t rank = 0;
  std::string seed_method;
  std::size_t n_iter = 0;
  std::size_t max_iter = 0;
  double rss = 0.0;
  double evar = 0.0;
  double dist_euclidean = 0.0;
  double dist_kl = 0.0;
  double sparseness_w = 0.0;
  double sparseness_h = 0.0;
  std::optional<std::vector<double>> objective_trace;
  std::vector<std::string> warnings;
  std::int64_t timing_ms = 0;
};

inline constexpr std::string_view kSummarySchemaVersion = "1";

/// Error("numeric") if any numeric field is not finite.
std::string summary_json(const SummaryDocument& doc);
SummaryDocument parse_summary(std::string_view json);
void write_summary(const SummaryDocument& doc, const std::string& path);

std::string report_json(const ConsensusReport& report);
/// Header line plus one row per rank.
std::string report_csv(const ConsensusReport& report);

/// Writes `text` to `path`; Error("io") on failure.
void write_text(const std::string& path, std::string_view text);
std::string read_text(const std::string& path);

struct SynthData {
  DataMatrix v;
  Dense w;
  Dense h;
};

/// Block-structured ground truth: row i of W* and column j of H* belong to
/// block floor(i k / m) and floor(j k / n). W* is U(0.5, 1) on its block and
/// 0 elsewhere; H* is U(0.5, 1) on its block and U(0, 0.1) elsewhere.
/// V = max(0, W* H* + N(0, noise^2)); with density < 1 only the largest
/// ceil(density m n) entries are kept and V is returned as CSR.
SynthData synth(std::size_t m, std::size_t n, std::size_t k, double noise, double density,
                std::uint64_t seed);

}  // namespace nmfkit
