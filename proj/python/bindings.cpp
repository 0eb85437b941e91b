#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "nmfkit/error.hpp"
#include "nmfkit/factor.hpp"
#include "nmfkit/mio.hpp"
#include "nmfkit/multirun.hpp"
#include "nmfkit/quality.hpp"

namespace py = pybind11;
using namespace nmfkit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IndexArray = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

Dense to_dense(const Array& a) {
  if (a.ndim() != 2) throw Error("shape", "expected a 2-d array, got " + std::to_string(a.ndim()) + "-d");
  const auto r = static_cast<std::size_t>(a.shape(0));
  const auto c = static_cast<std::size_t>(a.shape(1));
  return Dense(r, c, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Dense& d) {
  Array out({d.rows(), d.cols()});
  std::copy(d.values().begin(), d.values().end(), out.mutable_data());
  return out;
}

// V arrives either as a dense array or as (shape, indptr, indices, data).
DataMatrix to_data(const py::object& v) {
  if (py::isinstance<py::tuple>(v)) {
    const auto t = v.cast<py::tuple>();
    if (t.size() != 4) throw Error("shape", "sparse input must be (shape, indptr, indices, data)");
    const auto shape = t[0].cast<std::pair<std::size_t, std::size_t>>();
    const auto ptr = t[1].cast<IndexArray>();
    const auto idx = t[2].cast<IndexArray>();
    const auto val = t[3].cast<Array>();
    return Csr(shape.first, shape.second, std::vector<std::size_t>(ptr.data(), ptr.data() + ptr.size()),
               std::vector<std::size_t>(idx.data(), idx.data() + idx.size()),
               std::vector<double>(val.data(), val.data() + val.size()));
  }
  return to_dense(v.cast<Array>());
}

py::object from_data(const DataMatrix& m) {
  if (!m.is_sparse()) return to_array(m.dense());
  const Csr& c = m.csr();
  IndexArray ptr(static_cast<py::ssize_t>(c.row_ptr().size()));
  IndexArray idx(static_cast<py::ssize_t>(c.nnz()));
  Array val(static_cast<py::ssize_t>(c.nnz()));
  std::copy(c.row_ptr().begin(), c.row_ptr().end(), ptr.mutable_data());
  std::copy(c.col_idx().begin(), c.col_idx().end(), idx.mutable_data());
  std::copy(c.values().begin(), c.values().end(), val.mutable_data());
  return py::make_tuple(py::make_tuple(c.rows(), c.cols()), ptr, idx, val);
}

FactorModel model_of(const Array& w, const Array& h, const std::string& method, std::optional<double> theta) {
  FactorModel m;
  m.w = to_dense(w);
  m.h = to_dense(h);
  m.method = parse_method(method);
  m.theta = theta;
  return m;
}

FactorConfig config_of(const std::string& method, std::size_t rank, const std::string& seed,
                       std::size_t max_iter, double min_residual_delta, std::size_t conn_change,
                       std::uint64_t master_seed, bool track_error,
                       const std::map<std::string, double>& params) {
  FactorConfig c;
  c.method = parse_method(method);
  c.rank = rank;
  c.seed = SeedSpec::parse(seed);
  c.max_iter = max_iter;
  c.min_residual_delta = min_residual_delta;
  c.conn_change = conn_change;
  c.master_seed = master_seed;
  c.track_error = track_error;
  for (const auto& [k, v] : params) apply_param(c, k, v);
  c.params.validate();
  return c;
}

py::dict summary_dict(const FitSummary& s) {
  py::dict d;
  d["rss"] = s.rss;
  d["evar"] = s.evar;
  d["dist_euclidean"] = s.dist_euclidean;
  d["dist_kl"] = s.dist_kl;
  d["sparseness_w"] = s.sparseness_w;
  d["sparseness_h"] = s.sparseness_h;
  d["warnings"] = s.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "nmfkit native core";

  static py::handle error_type = py::exception<Error>(m, "NmfkitError", PyExc_ValueError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("kind") = e.kind();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def(
      "factorize",
      [](const py::object& v, const std::string& method, std::size_t rank, const std::string& seed,
         std::size_t max_iter, double min_residual_delta, std::size_t conn_change,
         std::uint64_t master_seed, bool track_error, const std::map<std::string, double>& params,
         std::optional<Array> fixed_w, std::optional<Array> fixed_h) {
        const DataMatrix data = to_data(v);
        FactorConfig c = config_of(method, rank, seed, max_iter, min_residual_delta, conn_change,
                                   master_seed, track_error, params);
        if (fixed_w) c.seed.fixed_w = to_dense(*fixed_w);
        if (fixed_h) c.seed.fixed_h = to_dense(*fixed_h);
        FactorResult r;
        {
          py::gil_scoped_release nogil;
          r = factorize(data, c);
        }
        py::dict d;
        d["w"] = to_array(r.model.w);
        d["h"] = to_array(r.model.h);
        d["n_iter"] = r.model.n_iter;
        d["final_objective"] = r.model.final_objective;
        d["objective_trace"] = r.trace.objective;
        return d;
      },
      py::arg("v"), py::arg("method"), py::arg("rank"), py::arg("seed") = "random_vcol",
      py::arg("max_iter") = 200, py::arg("min_residual_delta") = 1e-5, py::arg("conn_change") = 30,
      py::arg("master_seed") = 0, py::arg("track_error") = false,
      py::arg("params") = std::map<std::string, double>{}, py::arg("fixed_w") = py::none(),
      py::arg("fixed_h") = py::none());

  m.def(
      "summarize",
      [](const py::object& v, const Array& w, const Array& h, const std::string& method,
         std::optional<double> theta, const std::string& axis) {
        return summary_dict(summarize(to_data(v), model_of(w, h, method, theta), parse_sparseness_axis(axis)));
      },
      py::arg("v"), py::arg("w"), py::arg("h"), py::arg("method") = "nmf-eu",
      py::arg("theta") = py::none(), py::arg("axis") = "columns");

  m.def(
      "rss", [](const py::object& v, const Array& w, const Array& h) {
        return rss(to_data(v), model_of(w, h, "nmf-eu", std::nullopt));
      },
      py::arg("v"), py::arg("w"), py::arg("h"));
  m.def(
      "evar", [](const py::object& v, const Array& w, const Array& h) {
        return evar(to_data(v), model_of(w, h, "nmf-eu", std::nullopt));
      },
      py::arg("v"), py::arg("w"), py::arg("h"));
  m.def(
      "distance",
      [](const py::object& v, const Array& w, const Array& h, const std::string& metric) {
        return distance(to_data(v), model_of(w, h, "nmf-eu", std::nullopt), parse_metric(metric));
      },
      py::arg("v"), py::arg("w"), py::arg("h"), py::arg("metric") = "euclidean");
  m.def(
      "hoyer_sparseness", [](const std::vector<double>& x) { return hoyer_sparseness(x); },
      py::arg("x"));
  m.def(
      "feature_scores", [](const Array& w) { return feature_scores(to_dense(w)).scores; },
      py::arg("w"));
  m.def("select_features", &select_features, py::arg("scores"), py::arg("n_sigma") = 3.0);
  m.def(
      "connectivity", [](const Array& h) { return to_array(connectivity(to_dense(h))); },
      py::arg("h"));
  m.def(
      "cophenetic", [](const Array& c) { return cophenetic(to_dense(c)); }, py::arg("consensus"));
  m.def(
      "dispersion", [](const Array& c) { return dispersion(to_dense(c)); }, py::arg("consensus"));

  m.def(
      "rank_sweep",
      [](const py::object& v, const std::vector<std::size_t>& ranks, std::size_t runs,
         const std::string& method, const std::string& seed, std::size_t max_iter,
         std::uint64_t master_seed, std::size_t threads, const std::map<std::string, double>& params) {
        const DataMatrix data = to_data(v);
        RankSweepConfig s;
        s.ranks = ranks;
        s.runs_per_rank = runs;
        s.base = config_of(method, 1, seed, max_iter, 1e-5, 30, master_seed, false, params);
        s.master_seed = master_seed;
        s.threads = threads == 0 ? default_threads() : threads;
        ConsensusReport r;
        {
          py::gil_scoped_release nogil;
          r = rank_sweep(data, s);
        }
        py::list records;
        for (const RankRecord& rec : r.records) {
          py::dict d;
          d["rank"] = rec.rank;
          d["cophenetic"] = rec.cophenetic;
          d["dispersion"] = rec.dispersion;
          d["mean_rss"] = rec.mean_rss;
          d["mean_evar"] = rec.mean_evar;
          d["mean_n_iter"] = rec.mean_n_iter;
          records.append(d);
        }
        py::dict out;
        out["records"] = records;
        out["recommended_rank"] = r.recommended_rank;
        out["warnings"] = r.warnings;
        return out;
      },
      py::arg("v"), py::arg("ranks"), py::arg("runs") = 10, py::arg("method") = "nmf-kl",
      py::arg("seed") = "random_vcol", py::arg("max_iter") = 200, py::arg("master_seed") = 0,
      py::arg("threads") = 0, py::arg("params") = std::map<std::string, double>{});

  m.def(
      "synth",
      [](std::size_t rows, std::size_t cols, std::size_t rank, double noise, double density,
         std::uint64_t seed) {
        const SynthData d = synth(rows, cols, rank, noise, density, seed);
        return py::make_tuple(from_data(d.v), to_array(d.w), to_array(d.h));
      },
      py::arg("rows"), py::arg("cols"), py::arg("rank"), py::arg("noise") = 0.0,
      py::arg("density") = 1.0, py::arg("seed") = 0);

  m.def(
      "read_matrix",
      [](const std::string& path, bool allow_negative) {
        return from_data(read_matrix(path, std::nullopt, allow_negative));
      },
      py::arg("path"), py::arg("allow_negative") = false);
  m.def(
      "write_matrix",
      [](const py::object& v, const std::string& path, const std::string& format) {
        write_matrix(to_data(v), path, parse_format(format));
      },
      py::arg("v"), py::arg("path"), py::arg("format") = "mtx");
}
