#include "nmfkit/mio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "nmfkit/error.hpp"
#include "nmfkit/rng.hpp"

namespace nmfkit {

namespace {

using nlohmann::json;

std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw Error("parse", "line " + std::to_string(line) + ": " + what);
}

// Finite decimal number, or nullopt.
std::optional<double> to_real(std::string_view tok) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double x = 0.0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (tok.empty() || ec != std::errc() || p != tok.data() + tok.size()) return std::nullopt;
  return x;
}

double real_or_fail(std::string_view tok, std::size_t line) {
  const auto x = to_real(tok);
  if (!x) parse_fail(line, "bad number '" + std::string(tok) + "'");
  if (!std::isfinite(*x)) parse_fail(line, "non-finite value '" + std::string(tok) + "'");
  return *x;
}

std::size_t count_or_fail(std::string_view tok, std::size_t line) {
  std::size_t x = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (tok.empty() || ec != std::errc() || p != tok.data() + tok.size())
    parse_fail(line, "bad integer '" + std::string(tok) + "'");
  return x;
}

// Yields (line number, content) for each line of `text`.
class Lines {
 public:
  explicit Lines(std::string_view text) : text_(text) {}
  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const auto nl = text_.find('\n', pos_);
    const auto end = nl == std::string_view::npos ? text_.size() : nl;
    line = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    ++number_;
    return true;
  }
  std::size_t number() const noexcept { return number_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

DataMatrix parse_mtx(std::string_view text) {
  Lines lines(text);
  std::string_view line;
  if (!lines.next(line)) parse_fail(1, "empty file");
  const auto banner = split_ws(line);
  if (banner.size() != 5 || banner[0] != "%%MatrixMarket" || lower(banner[1]) != "matrix")
    parse_fail(1, "missing %%MatrixMarket matrix header");
  const std::string layout = lower(banner[2]);
  if (layout != "coordinate" && layout != "array")
    parse_fail(1, "unsupported layout '" + std::string(banner[2]) + "'");
  if (lower(banner[3]) != "real" && lower(banner[3]) != "integer")
    parse_fail(1, "unsupported field '" + std::string(banner[3]) + "'");
  if (lower(banner[4]) != "general")
    parse_fail(1, "unsupported symmetry '" + std::string(banner[4]) + "'");
  const bool coordinate = layout == "coordinate";

  auto next_content = [&](std::string_view& out) {
    while (lines.next(out)) {
      const auto t = trim(out);
      if (t.empty() || t.front() == '%') continue;
      out = t;
      return true;
    }
    return false;
  };

  if (!next_content(line)) parse_fail(lines.number() + 1, "missing size line");
  const auto size = split_ws(line);
  if (size.size() != (coordinate ? 3u : 2u)) parse_fail(lines.number(), "malformed size line");
  const std::size_t m = count_or_fail(size[0], lines.number());
  const std::size_t n = count_or_fail(size[1], lines.number());

  if (!coordinate) {
    Dense d(m, n);
    const std::size_t total = m * n;
    std::size_t got = 0;
    while (next_content(line)) {
      const auto tok = split_ws(line);
      if (tok.size() != 1) parse_fail(lines.number(), "expected one value per line");
      if (got == total) parse_fail(lines.number(), "more entries than the header declares");
      d(got % m, got / m) = real_or_fail(tok[0], lines.number());
      ++got;
    }
    if (got != total)
      parse_fail(lines.number(), "expected " + std::to_string(total) + " entries, found " +
                                     std::to_string(got));
    return d;
  }

  const std::size_t nnz = count_or_fail(size[2], lines.number());
  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
  entries.reserve(nnz);
  while (next_content(line)) {
    const auto tok = split_ws(line);
    if (tok.size() != 3) parse_fail(lines.number(), "expected 'row col value'");
    const std::size_t i = count_or_fail(tok[0], lines.number());
    const std::size_t j = count_or_fail(tok[1], lines.number());
    if (i < 1 || i > m || j < 1 || j > n) parse_fail(lines.number(), "index out of range");
    if (entries.size() == nnz) parse_fail(lines.number(), "more entries than the header declares");
    entries.emplace_back(i - 1, j - 1, real_or_fail(tok[2], lines.number()));
  }
  if (entries.size() != nnz)
    parse_fail(lines.number(), "expected " + std::to_string(nnz) + " entries, found " +
                                   std::to_string(entries.size()));
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  std::vector<std::size_t> row_ptr(m + 1, 0);
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  cols.reserve(nnz);
  vals.reserve(nnz);
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto& [i, j, x] = entries[e];
    if (e > 0 && std::get<0>(entries[e - 1]) == i && std::get<1>(entries[e - 1]) == j)
      throw Error("parse", "duplicate entry (" + std::to_string(i + 1) + ", " +
                               std::to_string(j + 1) + ")");
    ++row_ptr[i + 1];
    cols.push_back(j);
    vals.push_back(x);
  }
  std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
  return Csr(m, n, std::move(row_ptr), std::move(cols), std::move(vals));
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto c = s.find(',', start);
    out.push_back(trim(s.substr(start, c == std::string_view::npos ? c : c - start)));
    if (c == std::string_view::npos) break;
    start = c + 1;
  }
  return out;
}

DataMatrix parse_csv(std::string_view text) {
  Lines lines(text);
  std::string_view line;
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  bool first = true;
  while (lines.next(line)) {
    if (trim(line).empty()) continue;
    const auto tok = split_commas(line);
    if (first) {
      first = false;
      const bool header = std::any_of(tok.begin(), tok.end(),
                                      [](std::string_view t) { return !to_real(t); });
      if (header) continue;
    }
    if (rows == 0) {
      cols = tok.size();
    } else if (tok.size() != cols) {
      parse_fail(lines.number(), "expected " + std::to_string(cols) + " fields, found " +
                                     std::to_string(tok.size()));
    }
    for (auto t : tok) values.push_back(real_or_fail(t, lines.number()));
    ++rows;
  }
  if (rows == 0) parse_fail(lines.number(), "no data rows");
  return Dense(rows, cols, std::move(values));
}

void check_negative(const DataMatrix& m) {
  m.for_each_stored([](std::size_t i, std::size_t j, double x) {
    if (x < 0.0)
      throw Error("domain", "negative entry at (" + std::to_string(i + 1) + ", " +
                                std::to_string(j + 1) + ")");
  });
}

}  // namespace

MatrixFormat parse_format(std::string_view name) {
  if (name == "mtx") return MatrixFormat::mtx;
  if (name == "csv") return MatrixFormat::csv;
  throw Error("param", "unknown matrix format '" + std::string(name) + "'");
}

std::string_view format_name(MatrixFormat f) noexcept {
  return f == MatrixFormat::mtx ? "mtx" : "csv";
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error("io", "read failed for '" + path + "'");
  return ss.str();
}

void write_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw Error("io", "write failed for '" + path + "'");
}

DataMatrix parse_matrix(std::string_view text, MatrixFormat format, bool allow_negative) {
  DataMatrix m = format == MatrixFormat::mtx ? parse_mtx(text) : parse_csv(text);
  if (!allow_negative) check_negative(m);
  return m;
}

DataMatrix read_matrix(const std::string& path, std::optional<MatrixFormat> format,
                       bool allow_negative) {
  const std::string text = read_text(path);
  const MatrixFormat f =
      format ? *format
             : (text.rfind("%%MatrixMarket", 0) == 0 ? MatrixFormat::mtx : MatrixFormat::csv);
  try {
    return parse_matrix(text, f, allow_negative);
  } catch (const Error& e) {
    throw Error(e.kind(), "'" + path + "': " + e.message());
  }
}

std::string format_matrix(const DataMatrix& m, MatrixFormat format) {
  std::string out;
  if (format == MatrixFormat::csv) {
    const Dense d = m.to_dense();
    for (std::size_t i = 0; i < d.rows(); ++i) {
      for (std::size_t j = 0; j < d.cols(); ++j) {
        if (j) out += ',';
        out += fmt17(d(i, j));
      }
      out += '\n';
    }
    return out;
  }
  if (m.is_sparse()) {
    const Csr& s = m.csr();
    out += "%%MatrixMarket matrix coordinate real general\n";
    out += std::to_string(s.rows()) + ' ' + std::to_string(s.cols()) + ' ' +
           std::to_string(s.nnz()) + '\n';
    m.for_each_stored([&](std::size_t i, std::size_t j, double x) {
      out += std::to_string(i + 1) + ' ' + std::to_string(j + 1) + ' ' + fmt17(x) + '\n';
    });
    return out;
  }
  const Dense& d = m.dense();
  out += "%%MatrixMarket matrix array real general\n";
  out += std::to_string(d.rows()) + ' ' + std::to_string(d.cols()) + '\n';
  for (std::size_t j = 0; j < d.cols(); ++j)
    for (std::size_t i = 0; i < d.rows(); ++i) out += fmt17(d(i, j)) + '\n';
  return out;
}

void write_matrix(const DataMatrix& m, const std::string& path, MatrixFormat format) {
  write_text(path, format_matrix(m, format));
}

// ---- summary ---------------------------------------------------------------

std::string summary_json(const SummaryDocument& doc) {
  const double nums[] = {doc.rss, doc.evar, doc.dist_euclidean, doc.dist_kl,
                         doc.sparseness_w, doc.sparseness_h};
  for (double x : nums)
    if (!std::isfinite(x)) throw Error("numeric", "summary contains a non-finite measure");
  json j;
  j["schema_version"] = std::string(kSummarySchemaVersion);
  j["method"] = doc.method;
  j["rank"] = doc.rank;
  j["seed_method"] = doc.seed_method;
  j["n_iter"] = doc.n_iter;
  j["max_iter"] = doc.max_iter;
  j["rss"] = doc.rss;
  j["evar"] = doc.evar;
  j["dist_euclidean"] = doc.dist_euclidean;
  j["dist_kl"] = doc.dist_kl;
  j["sparseness_w"] = doc.sparseness_w;
  j["sparseness_h"] = doc.sparseness_h;
  if (doc.objective_trace) {
    for (double x : *doc.objective_trace)
      if (!std::isfinite(x)) throw Error("numeric", "objective trace contains a non-finite value");
    j["objective_trace"] = *doc.objective_trace;
  }
  j["warnings"] = doc.warnings;
  j["timing_ms"] = doc.timing_ms;
  return j.dump(2) + "\n";
}

SummaryDocument parse_summary(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("schema_version").get<std::string>() != kSummarySchemaVersion)
      throw Error("parse", "unsupported summary schema version");
    SummaryDocument d;
    d.method = j.at("method").get<std::string>();
    d.rank = j.at("rank").get<std::size_t>();
    d.seed_method = j.at("seed_method").get<std::string>();
    d.n_iter = j.at("n_iter").get<std::size_t>();
    d.max_iter = j.at("max_iter").get<std::size_t>();
    d.rss = j.at("rss").get<double>();
    d.evar = j.at("evar").get<double>();
    d.dist_euclidean = j.at("dist_euclidean").get<double>();
    d.dist_kl = j.at("dist_kl").get<double>();
    d.sparseness_w = j.at("sparseness_w").get<double>();
    d.sparseness_h = j.at("sparseness_h").get<double>();
    if (j.contains("objective_trace"))
      d.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    d.warnings = j.at("warnings").get<std::vector<std::string>>();
    d.timing_ms = j.at("timing_ms").get<std::int64_t>();
    return d;
  } catch (const json::exception& e) {
    throw Error("parse", std::string("summary: ") + e.what());
  }
}

void write_summary(const SummaryDocument& doc, const std::string& path) {
  write_text(path, summary_json(doc));
}

// ---- consensus report ------------------------------------------------------

std::string report_json(const ConsensusReport& report) {
  json records = json::array();
  for (const auto& r : report.records) {
    records.push_back({{"rank", r.rank},
                       {"cophenetic", r.cophenetic},
                       {"dispersion", r.dispersion},
                       {"mean_rss", r.mean_rss},
                       {"mean_evar", r.mean_evar},
                       {"mean_n_iter", r.mean_n_iter}});
  }
  json j;
  j["records"] = records;
  j["recommended_rank"] = report.recommended_rank;
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

std::string report_csv(const ConsensusReport& report) {
  std::string out = "rank,cophenetic,dispersion,mean_rss,mean_evar,mean_n_iter\n";
  for (const auto& r : report.records) {
    out += std::to_string(r.rank) + ',' + fmt17(r.cophenetic) + ',' + fmt17(r.dispersion) + ',' +
           fmt17(r.mean_rss) + ',' + fmt17(r.mean_evar) + ',' + fmt17(r.mean_n_iter) + '\n';
  }
  return out;
}

// ---- synthetic data --------------------------------------------------------

SynthData synth(std::size_t m, std::size_t n, std::size_t k, double noise, double density,
                std::uint64_t seed) {
  if (k < 1 || k > std::min(m, n)) throw Error("param", "synth: need 1 <= k <= min(m, n)");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw Error("param", "synth: noise must be >= 0");
  if (!(density > 0.0 && density <= 1.0)) throw Error("param", "synth: density must lie in (0, 1]");

  RngStream rng(seed);
  Dense w(m, k);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t block = i * k / m;
    w(i, block) = rng.uniform(0.5, 1.0);
  }
  Dense h(k, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t block = j * k / n;
    for (std::size_t a = 0; a < k; ++a)
      h(a, j) = a == block ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.1);
  }

  Dense v = matmul(w, h);
  if (noise > 0.0)
    for (double& x : v.values()) x = std::max(0.0, x + noise * rng.normal());

  if (density < 1.0) {
    const std::size_t total = m * n;
    const auto keep = static_cast<std::size_t>(std::ceil(density * static_cast<double>(total) - 1e-9));
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    const auto vals = v.values();
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
    for (std::size_t p = keep; p < total; ++p) v.values()[order[p]] = 0.0;
    return {Csr::from_dense(v), std::move(w), std::move(h)};
  }
  return {std::move(v), std::move(w), std::move(h)};
}

}  // namespace nmfkit
