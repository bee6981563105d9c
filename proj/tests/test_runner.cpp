// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <set>

#include "aqop_doctest.h"

#include "aqop/csv.hpp"
#include "aqop/runner.hpp"
#include "aqop/synthgen.hpp"
#include "aqop/types.hpp"

namespace fs = std::filesystem;
using aqop::ExperimentConfig;
using aqop::Family;
using aqop::FeatureSet;

TEST_CASE("config parsing applies defaults and rejects unknown keys") {
  auto c = ExperimentConfig::from_json_text(
      R"({"target": "op_aa", "family": "transfer", "features": "I+H",
          "data_root": "/d", "out_dir": "/o", "imagenet_weights": "/w.aqt"})");
  CHECK(c.target == aqop::Target::OpAA);
  CHECK(c.family == Family::Transfer);
  CHECK(c.features == FeatureSet::IH);
  CHECK(c.max_epochs == 150);
  CHECK(c.patience == 25);
  CHECK(c.batch_size == 32);
  CHECK(c.bootstrap_b == 1000);
  c.validate();

  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json_text(R"({"targett": "pm10"})"),
                       doctest::Contains("targett"), aqop::Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("not json"), aqop::Error);

  auto no_patience = ExperimentConfig::from_json_text(R"({"patience": null})");
  CHECK_FALSE(no_patience.patience.has_value());
}

TEST_CASE("config validation enforces the model grid rules") {
  ExperimentConfig c;
  c.data_root = "/d";
  c.out_dir = "/o";

  SUBCASE("baseline is met-only") {
    c.family = Family::Baseline;
    c.features = FeatureSet::IM;
    CHECK_THROWS_AS(c.validate(), aqop::Error);
  }
  SUBCASE("image families need image features") {
    c.family = Family::Random;
    c.features = FeatureSet::M;
    CHECK_THROWS_AS(c.validate(), aqop::Error);
  }
  SUBCASE("the forest features pair with transfer and finetune only") {
    c.family = Family::SimSiam;
    c.features = FeatureSet::IH;
    CHECK_THROWS_AS(c.validate(), aqop::Error);
  }
  SUBCASE("weight paths are mandatory for file-backed families") {
    c.features = FeatureSet::IM;
    c.family = Family::Transfer;
    CHECK_THROWS_AS(c.validate(), aqop::Error);
    c.family = Family::SimSiamBJ;
    CHECK_THROWS_AS(c.validate(), aqop::Error);
    c.simsiam_bj_weights = "/w.aqt";
    c.validate();
  }
  SUBCASE("missing paths") {
    c.family = Family::Baseline;
    c.features = FeatureSet::M;
    c.data_root = "";
    CHECK_THROWS_AS(c.validate(), aqop::Error);
  }
}

TEST_CASE("run names and config hashes are stable and discriminating") {
  ExperimentConfig c;
  c.target = aqop::Target::OpDTT;
  c.family = Family::Finetune;
  c.features = FeatureSet::IM;
  c.seed = 4;
  c.data_root = "/d";
  c.out_dir = "/o";
  CHECK(c.run_name() == "finetune_I+M_op_dtt_RGB_seed4");
  const auto h = c.hash();
  CHECK(c.hash() == h);
  auto d = c;
  d.seed = 5;
  CHECK(d.hash() != h);
  // The snapshot round trips through its own JSON.
  auto back = ExperimentConfig::from_json_text(c.to_json());
  CHECK(back.hash() == h);
}

TEST_CASE("the report grid has the fifteen model/feature rows") {
  const auto rows = aqop::report_grid_rows();
  CHECK(rows.size() == 15);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [f, fs_] : rows) {
    seen.insert({aqop::to_string(f), aqop::to_string(fs_)});
  }
  CHECK(seen.size() == 15);
  CHECK(rows.front() == std::pair{Family::Baseline, FeatureSet::M});
  CHECK(seen.count({"transfer", "I+H"}) == 1);
  CHECK(seen.count({"simsiam_dl", "I"}) == 1);
  CHECK(seen.count({"baseline", "I"}) == 0);
}

TEST_CASE("prepare and a baseline run work on a small synthetic corpus") {
  const auto dir = fs::temp_directory_path() / "aqop_runner_test";
  fs::remove_all(dir);
  aqop::SynthConfig scfg;
  scfg.n_stations = 2;
  scfg.n_days = 30;
  scfg.seed = 12;
  aqop::write_corpus(aqop::generate_corpus(scfg), scfg, (dir / "corpus").string());

  const auto summary = aqop::prepare_corpus((dir / "corpus").string(), aqop::ImageType::RGB, 1,
                                            (dir / "prepare.json").string());
  CHECK(summary.scenes_total == 60);
  CHECK(summary.scenes_clear == 60);
  CHECK(summary.records == 60);
  CHECK(summary.val_dates == 6);
  CHECK(summary.test_dates == 6);
  CHECK(summary.train_dates == 18);
  CHECK(fs::exists(dir / "prepare.json"));

  ExperimentConfig c;
  c.target = aqop::Target::PM10;
  c.family = Family::Baseline;
  c.features = FeatureSet::M;
  c.seed = 2;
  c.data_root = (dir / "corpus").string();
  c.out_dir = (dir / "runs").string();
  c.max_epochs = 5;
  c.bootstrap_b = 50;

  const auto art = aqop::run_experiment(c);
  REQUIRE(art.reports.size() == 3);
  CHECK(art.reports[0].split == "train");
  CHECK(art.reports[2].split == "test");
  CHECK(art.reports[0].n == 36);
  REQUIRE(art.cis.size() == 3);
  CHECK(art.cis[0].metric == "r2");
  for (const char* name :
       {"config.json", "metrics.csv", "bootstrap.csv", "predictions.csv", "history.csv",
        "summary.json", "checkpoint.aqt", "loss_curve.svg", "scatter_test.svg"}) {
    CHECK_MESSAGE(fs::exists(fs::path(art.run_dir) / name), name);
  }

  SUBCASE("a failed run leaves no partial artifacts") {
    auto bad = c;
    bad.target = aqop::Target::OpAA;
    bad.max_epochs = 5;
    bad.batch_size = 4096;  // train set smaller than one batch
    CHECK_THROWS_WITH_AS(aqop::run_experiment(bad), doctest::Contains("stage train"),
                         aqop::Error);
    CHECK_FALSE(fs::exists(fs::path(bad.out_dir) / bad.run_name()));
  }

  SUBCASE("the aggregated report covers the run") {
    const auto report_path = (dir / "report.csv").string();
    aqop::emit_report_from_tree((dir / "runs").string(), report_path);
    auto t = aqop::CsvTable::read_file(report_path);
    REQUIRE(t.num_rows() == 1);
    CHECK(t.cell(0, "model") == "Baseline");
    CHECK(t.cell(0, "features") == "M");
    CHECK(t.cell_double(0, "pm10_r2").has_value());
    CHECK(t.cell(0, "op_aa_r2").empty());
  }
  fs::remove_all(dir);
}
