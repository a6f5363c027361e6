// Python module: thin keyword-argument wrappers over the simulation
// laboratory's core operations, with datasets crossing the boundary as an
// opaque handle plus list-based accessors.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlmi/analysis.hpp"
#include "mlmi/datagen.hpp"
#include "mlmi/dataset.hpp"
#include "mlmi/errors.hpp"
#include "mlmi/harness.hpp"
#include "mlmi/imputers.hpp"
#include "mlmi/missingness.hpp"
#include "mlmi/rng.hpp"

namespace py = pybind11;
using namespace mlmi;

namespace {

ImputeParams build_params(int m, std::uint64_t seed, int num_trees,
                          int n_rounds, int sweeps, int pmm_k,
                          bool use_outcome) {
  ImputeParams p;
  p.m = m;
  p.seed = seed;
  if (num_trees > 0) p.forest.num_trees = num_trees;
  if (n_rounds > 0) p.boost.n_rounds = n_rounds;
  if (sweeps > 0) {
    p.rf_maxiter = sweeps;
    p.boost_maxit = sweeps;
    p.ce_maxit = sweeps;
  }
  if (pmm_k >= 0) {
    p.rf_pmm_k = pmm_k;
    p.boost_pmm_k = pmm_k;
    p.ce_pmm_k = pmm_k;
  }
  p.use_outcome = use_outcome;
  return p;
}

py::dict fit_to_dict(const FitResult& fr) {
  py::dict d;
  d["converged"] = fr.converged;
  d["names"] = fr.coef_names;
  d["estimates"] = fr.estimates;
  d["std_errors"] = fr.std_errors;
  d["sigma2_e"] = fr.sigma2_e;
  d["tau2"] = fr.tau2;
  std::vector<double> p_values;
  for (const std::string& name : fr.coef_names)
    p_values.push_back(wald(fr, name).p_value);
  d["p_values"] = p_values;
  return d;
}

py::list pooled_to_list(const PooledResult& pr) {
  py::list out;
  for (const PooledCoef& c : pr.coefs) {
    py::dict d;
    d["name"] = c.name;
    d["estimate"] = c.estimate;
    d["within"] = c.within;
    d["between"] = c.between;
    d["total"] = c.total;
    d["df"] = c.df;
    d["statistic"] = c.statistic;
    d["p_value"] = c.p_value;
    d["reject"] = c.reject;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-level missing-data simulation laboratory";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("n_rows", &Dataset::n_rows)
      .def_property_readonly("n_cols", &Dataset::n_cols)
      .def_property_readonly("names",
                             [](const Dataset& ds) {
                               std::vector<std::string> out;
                               for (int c = 0; c < ds.n_cols(); ++c)
                                 out.push_back(ds.name(c));
                               return out;
                             })
      .def_property_readonly(
          "cluster_ids",
          [](const Dataset& ds) { return ds.cluster_ids(); })
      .def(
          "column",
          [](const Dataset& ds, const std::string& name) {
            const int c = ds.col(name);
            std::vector<std::optional<double>> out;
            out.reserve(ds.n_rows());
            for (int r = 0; r < ds.n_rows(); ++r)
              out.push_back(ds.observed(r, c)
                                ? std::optional<double>(ds.value(r, c))
                                : std::nullopt);
            return out;
          },
          py::arg("name"),
          "Column values in row order; None marks a missing cell.")
      .def("n_missing",
           [](const Dataset& ds) {
             long total = 0;
             for (int c = 0; c < ds.n_cols(); ++c) total += ds.missing_count(c);
             return total;
           })
      .def("to_csv",
           [](const Dataset& ds, const std::string& path) {
             write_csv(ds, path);
           },
           py::arg("path"))
      .def_static("from_csv",
                  [](const std::string& path) { return read_csv(path); },
                  py::arg("path"))
      .def("__repr__", [](const Dataset& ds) {
        return "Dataset(" + std::to_string(ds.n_rows()) + " rows, " +
               std::to_string(ds.n_cols()) + " columns)";
      });

  m.def(
      "generate",
      [](int n_clusters, int total_n, const std::string& model,
         std::uint64_t seed, double icc_lo, double icc_hi) {
        GenConfig cfg;
        cfg.n_clusters = n_clusters;
        cfg.total_n = total_n;
        cfg.model = outcome_model_from_string(model);
        cfg.seed = seed;
        cfg.icc_lo = icc_lo;
        cfg.icc_hi = icc_hi;
        cfg.validate();
        return gen_dataset(cfg);
      },
      py::arg("n_clusters") = 25, py::arg("total_n") = 1000,
      py::arg("model") = "ri", py::arg("seed") = 0, py::arg("icc_lo") = 0.1,
      py::arg("icc_hi") = 0.5,
      "Complete two-level dataset: X1..X6, L1..L6 and the outcome Y.");

  m.def(
      "ampute",
      [](const Dataset& ds, const std::string& mechanism, double rate,
         std::uint64_t seed, const std::string& anchor, int n_bins,
         std::vector<std::string> columns, bool cellwise) {
        AmputeSpec spec;
        spec.mechanism = mechanism_from_string(mechanism);
        spec.rate = rate;
        spec.seed = seed;
        spec.anchor_column = anchor;
        spec.n_bins = n_bins;
        spec.target_columns = std::move(columns);
        spec.level2_cellwise = cellwise;
        return ampute(ds, spec);
      },
      py::arg("ds"), py::arg("mechanism") = "mcar", py::arg("rate") = 0.3,
      py::arg("seed") = 0, py::arg("anchor") = "X1", py::arg("n_bins") = 6,
      py::arg("columns") = std::vector<std::string>{},
      py::arg("cellwise") = false,
      "Mask cells of a complete dataset under MCAR or MAR.");

  m.def(
      "missing_profile",
      [](const Dataset& ds) {
        const MissingProfile p = missing_profile(ds);
        py::dict d;
        py::dict per;
        for (const auto& [name, frac] : p.per_column) per[name.c_str()] = frac;
        d["per_column"] = per;
        d["overall"] = p.overall;
        return d;
      },
      py::arg("ds"));

  m.def(
      "impute",
      [](const Dataset& ds, const std::string& method, int m_,
         std::uint64_t seed, int num_trees, int n_rounds, int sweeps,
         int pmm_k, bool use_outcome) {
        const ImputeParams params = build_params(m_, seed, num_trees, n_rounds,
                                                 sweeps, pmm_k, use_outcome);
        Rng rng(seed);
        return run_method(method_from_string(method), ds, params, rng)
            .completed;
      },
      py::arg("ds"), py::arg("method"), py::arg("m") = 5, py::arg("seed") = 0,
      py::arg("num_trees") = -1, py::arg("n_rounds") = -1,
      py::arg("sweeps") = -1, py::arg("pmm_k") = -1,
      py::arg("use_outcome") = true,
      "m completed copies of an incomplete dataset.");

  m.def(
      "fit",
      [](const Dataset& ds, const std::string& model) {
        return fit_to_dict(model == "rs" ? fit_lmm_rs(ds) : fit_lmm_ri(ds));
      },
      py::arg("ds"), py::arg("model") = "ri",
      "REML fit of the random-intercept (ri) or random-slope (rs) model.");

  m.def(
      "analyze",
      [](const std::vector<Dataset>& completed, const std::string& model,
         double alpha) {
        std::vector<FitResult> fits;
        for (const Dataset& ds : completed) {
          FitResult fr = model == "rs" ? fit_lmm_rs(ds) : fit_lmm_ri(ds);
          if (fr.converged) fits.push_back(std::move(fr));
        }
        if (fits.size() < 2)
          throw FitError("pooling needs at least 2 converged fits");
        return pooled_to_list(pool_rubin(fits, alpha));
      },
      py::arg("completed"), py::arg("model") = "ri", py::arg("alpha") = 0.05,
      "Fit every completed dataset and pool the coefficients.");

  m.def(
      "run_cell",
      [](int n_clusters, const std::string& model, const std::string& mechanism,
         double rate, const std::vector<std::string>& methods,
         int replications, std::uint64_t seed, int threads, int total_n,
         int m_, int num_trees, int n_rounds) {
        SimDesign d;
        d.n_clusters = n_clusters;
        d.model = outcome_model_from_string(model);
        d.mechanism = mechanism_from_string(mechanism);
        d.rate = rate;
        d.methods.clear();
        for (const std::string& name : methods)
          d.methods.push_back(method_from_string(name));
        d.replications = replications;
        d.base_seed = seed;
        d.threads = threads;
        d.total_n = total_n;
        d.imputation = build_params(m_, 0, num_trees, n_rounds, -1, -1, true);
        const DesignOutcome out = run_design(d);
        py::list rows;
        for (const ResultsRow& r : out.table.rows) {
          py::dict row;
          row["n_clusters"] = r.n_clusters;
          row["model"] = r.model;
          row["mechanism"] = r.mechanism;
          row["rate"] = r.rate;
          row["method"] = r.method;
          row["coefficient"] = r.coefficient;
          row["true_value"] = r.true_value;
          row["rejection_rate"] = r.rejection_rate;
          row["bias"] = r.bias;
          row["relative_bias"] = r.relative_bias;
          row["mc_se"] = r.mc_se;
          row["n_converged"] = r.n_converged;
          rows.append(row);
        }
        return rows;
      },
      py::arg("n_clusters") = 25, py::arg("model") = "ri",
      py::arg("mechanism") = "mcar", py::arg("rate") = 0.3,
      py::arg("methods") =
          std::vector<std::string>{"ce_2level", "rf", "rf_pmm", "rf_dummies",
                                   "rf_pmm_dummies", "boost", "boost_dummies"},
      py::arg("replications") = 200, py::arg("seed") = 0,
      py::arg("threads") = 1, py::arg("total_n") = 1000, py::arg("m") = 5,
      py::arg("num_trees") = 50, py::arg("n_rounds") = 50,
      "One factorial cell: long-format metric rows per (method, coefficient).");

  m.def("methods", [] {
    std::vector<std::string> out;
    for (Method method : all_methods()) out.push_back(to_string(method));
    return out;
  });
}
