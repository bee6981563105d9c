// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "aqop/dataset.hpp"
#include "aqop/metembed.hpp"
#include "aqop/metrics.hpp"
#include "aqop/runner.hpp"
#include "aqop/synthgen.hpp"
#include "aqop/types.hpp"

namespace py = pybind11;

namespace {

aqop::MetVector met_from_list(const std::vector<double>& v) {
  if (v.size() != aqop::MetVector::kDim) {
    throw aqop::Error("met vector needs exactly 6 values");
  }
  return aqop::MetVector::from_values({v[0], v[1], v[2], v[3], v[4], v[5]});
}

py::dict report_to_dict(const aqop::MetricsReport& r) {
  py::dict d;
  d["r2"] = r.r2;
  d["rmse"] = r.rmse;
  d["nmae"] = r.nmae;
  d["n"] = r.n;
  d["split"] = r.split;
  return d;
}

}  // namespace

PYBIND11_MODULE(_aqop, m) {
  m.doc() = "Daily PM10 and oxidative-potential estimation from satellite image patches";

  py::register_exception<aqop::Error>(m, "AqopError");

  m.def("compute_metrics",
        [](const std::vector<double>& y, const std::vector<double>& yhat) {
          return report_to_dict(aqop::compute_metrics(y, yhat));
        },
        py::arg("observed"), py::arg("estimated"),
        "R2, RMSE, and NMAE of estimates against observations.");

  m.def("spearman", &aqop::spearman, py::arg("a"), py::arg("b"),
        "Spearman rank correlation with average ranks for ties.");

  m.def("bootstrap_ci",
        [](const std::vector<double>& y, const std::vector<double>& yhat,
           const std::string& metric, int b, std::uint64_t seed) {
          aqop::MetricFn fn;
          if (metric == "r2") {
            fn = [](const auto& a, const auto& c) { return aqop::compute_metrics(a, c).r2; };
          } else if (metric == "rmse") {
            fn = [](const auto& a, const auto& c) { return aqop::compute_metrics(a, c).rmse; };
          } else if (metric == "nmae") {
            fn = [](const auto& a, const auto& c) { return aqop::compute_metrics(a, c).nmae; };
          } else {
            throw aqop::Error("unknown metric: " + metric);
          }
          auto ci = aqop::bootstrap_ci(y, yhat, metric, fn, b, seed);
          py::dict d;
          d["metric"] = ci.metric;
          d["point"] = ci.point;
          d["lower"] = ci.lower;
          d["upper"] = ci.upper;
          d["b"] = ci.b;
          return d;
        },
        py::arg("observed"), py::arg("estimated"), py::arg("metric"), py::arg("b") = 1000,
        py::arg("seed") = 0,
        "Percentile bootstrap 95% confidence interval for r2, rmse, or nmae.");

  m.def("assign_splits",
        [](const std::vector<std::string>& dates, std::uint64_t seed) {
          std::set<aqop::Date> ds;
          for (const auto& d : dates) ds.insert(aqop::Date::parse(d));
          auto splits = aqop::assign_splits(ds, {0.6, 0.2, 0.2}, seed);
          py::dict out;
          for (const auto& [date, split] : splits.by_date) {
            out[py::str(date.str())] = aqop::to_string(split);
          }
          return out;
        },
        py::arg("dates"), py::arg("seed"),
        "60/20/20 per-date partition; deterministic in the seed.");

  m.def("apply_outlier_filter",
        [](const std::string& station, const std::string& date, py::object pm10,
           py::object op_aa, py::object op_dtt) {
          aqop::AQObservation aq;
          aq.station_id = station;
          aq.date = aqop::Date::parse(date);
          if (!pm10.is_none()) aq.pm10 = pm10.cast<double>();
          if (!op_aa.is_none()) aq.op_aa = op_aa.cast<double>();
          if (!op_dtt.is_none()) aq.op_dtt = op_dtt.cast<double>();
          auto out = aqop::apply_outlier_filter(aq);
          py::dict d;
          d["pm10"] = out.pm10 ? py::object(py::float_(*out.pm10)) : py::none();
          d["op_aa"] = out.op_aa ? py::object(py::float_(*out.op_aa)) : py::none();
          d["op_dtt"] = out.op_dtt ? py::object(py::float_(*out.op_dtt)) : py::none();
          return d;
        },
        py::arg("station"), py::arg("date"), py::arg("pm10") = py::none(),
        py::arg("op_aa") = py::none(), py::arg("op_dtt") = py::none(),
        "Drops any measure strictly above its plausibility threshold.");

  m.def("aggregate_met",
        [](const std::vector<std::vector<double>>& hourly) {
          std::vector<aqop::MetVector> rows;
          rows.reserve(hourly.size());
          for (const auto& h : hourly) rows.push_back(met_from_list(h));
          auto v = aqop::aggregate_met(rows).values();
          return std::vector<double>(v.begin(), v.end());
        },
        py::arg("hourly"), "24-hour mean of hourly met vectors; requires all 24 hours.");

  py::class_<aqop::MetForest>(m, "MetForest",
                              "Unsupervised extremely randomized forest embedding of the 6 "
                              "meteorological variables.")
      .def_static("fit",
                  [](const std::vector<std::vector<double>>& rows, int n_trees, int max_depth,
                     std::uint64_t seed) {
                    std::vector<aqop::MetVector> met;
                    met.reserve(rows.size());
                    for (const auto& r : rows) met.push_back(met_from_list(r));
                    return aqop::MetForest::fit(met, aqop::ForestSpec{n_trees, max_depth, seed});
                  },
                  py::arg("rows"), py::arg("n_trees") = 256, py::arg("max_depth") = 3,
                  py::arg("seed") = 0)
      .def("embed_indices",
           [](const aqop::MetForest& f, const std::vector<double>& row) {
             return f.embed_indices(met_from_list(row));
           },
           py::arg("row"))
      .def("embed",
           [](const aqop::MetForest& f, const std::vector<double>& row) {
             return f.embed(met_from_list(row));
           },
           py::arg("row"))
      .def_property_readonly("dimension", &aqop::MetForest::dimension)
      .def("save", &aqop::MetForest::save, py::arg("path"))
      .def_static("load", &aqop::MetForest::load, py::arg("path"));

  m.def("write_synthetic_corpus",
        [](const std::string& out_dir, int n_stations, int n_days, double haze_strength,
           double season_amplitude, double noise_sd, std::uint64_t seed,
           const std::string& image_type) {
          aqop::SynthConfig cfg;
          cfg.n_stations = n_stations;
          cfg.n_days = n_days;
          cfg.haze_strength = haze_strength;
          cfg.season_amplitude = season_amplitude;
          cfg.noise_sd = noise_sd;
          cfg.seed = seed;
          cfg.image_type = aqop::parse_image_type(image_type);
          auto corpus = aqop::generate_corpus(cfg);
          aqop::write_corpus(corpus, cfg, out_dir);
          return corpus.records.size();
        },
        py::arg("out_dir"), py::arg("n_stations") = 3, py::arg("n_days") = 365,
        py::arg("haze_strength") = 1.0, py::arg("season_amplitude") = 1.0,
        py::arg("noise_sd") = 0.05, py::arg("seed") = 0, py::arg("image_type") = "RGB",
        "Writes a synthetic corpus with known ground truth; returns the record count.");

  m.def("prepare_corpus",
        [](const std::string& data_root, const std::string& image_type, std::uint64_t seed) {
          auto s = aqop::prepare_corpus(data_root, aqop::parse_image_type(image_type), seed);
          py::dict d;
          d["scenes_total"] = s.scenes_total;
          d["scenes_clear"] = s.scenes_clear;
          d["records"] = s.records;
          d["train_dates"] = s.train_dates;
          d["val_dates"] = s.val_dates;
          d["test_dates"] = s.test_dates;
          d["reject_reasons"] = s.reject_reasons;
          return d;
        },
        py::arg("data_root"), py::arg("image_type") = "RGB", py::arg("seed") = 0,
        "Validates a data root and reports corpus counts.");

  m.def("run_experiment",
        [](const std::string& config_json) {
          auto cfg = aqop::ExperimentConfig::from_json_text(config_json);
          auto art = aqop::run_experiment(cfg);
          py::dict d;
          d["run_dir"] = art.run_dir;
          d["checkpoint"] = art.checkpoint_path;
          d["best_epoch"] = art.best_epoch;
          d["station_skill"] = art.station_skill;
          d["config_hash"] = art.config_hash;
          py::dict metrics;
          for (const auto& r : art.reports) metrics[py::str(r.split)] = report_to_dict(r);
          d["metrics"] = metrics;
          return d;
        },
        py::arg("config_json"),
        "Runs one configured experiment end to end; returns metrics and artifact paths.");

  m.def("emit_report", &aqop::emit_report_from_tree, py::arg("runs_root"), py::arg("out_csv"),
        "Aggregates finished runs into one model-by-target report CSV.");
}
