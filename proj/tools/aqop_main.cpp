// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "aqop/csv.hpp"
#include "aqop/runner.hpp"
#include "aqop/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// AQOP_DATA_ROOT, when set, wins over the config file.
void apply_env_data_root(aqop::ExperimentConfig& cfg) {
  const char* env = std::getenv("AQOP_DATA_ROOT");
  if (env && *env) cfg.data_root = env;
}

std::string env_or(const std::string& value) {
  const char* env = std::getenv("AQOP_DATA_ROOT");
  if (env && *env) return env;
  return value;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw aqop::Error("cannot read config file: " + path);
  try {
    return json::parse(in);
  } catch (const std::exception& e) {
    throw aqop::Error(std::string("invalid JSON in ") + path + ": " + e.what());
  }
}

aqop::SynthConfig parse_synth_config(const json& j) {
  aqop::SynthConfig c;
  if (j.contains("n_stations")) c.n_stations = j.at("n_stations").get<int>();
  if (j.contains("n_days")) c.n_days = j.at("n_days").get<int>();
  if (j.contains("haze_strength")) c.haze_strength = j.at("haze_strength").get<double>();
  if (j.contains("season_amplitude")) c.season_amplitude = j.at("season_amplitude").get<double>();
  if (j.contains("noise_sd")) c.noise_sd = j.at("noise_sd").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("image_type")) c.image_type = aqop::parse_image_type(j.at("image_type"));
  if (j.contains("start_date")) c.start_date = aqop::Date::parse(j.at("start_date"));
  return c;
}

void print_run(const aqop::RunArtifacts& art) {
  for (const auto& r : art.reports) {
    std::cout << r.model << " " << r.target << " " << r.split << ": n=" << r.n
              << " r2=" << aqop::format_double(r.r2, 4)
              << " rmse=" << aqop::format_double(r.rmse, 4)
              << " nmae=" << aqop::format_double(r.nmae, 4) << "\n";
  }
  std::cout << "station_skill=" << aqop::format_double(art.station_skill, 4)
            << " best_epoch=" << art.best_epoch << " artifacts=" << art.run_dir << "\n";
}

int run_matrix(const std::string& config_path, std::optional<std::uint64_t> seed,
               const std::string& out_dir) {
  json j = read_json_file(config_path);
  std::vector<std::string> targets = {"pm10", "op_aa", "op_dtt"};
  if (j.contains("targets")) {
    targets = j.at("targets").get<std::vector<std::string>>();
    j.erase("targets");
  }
  std::vector<std::pair<aqop::Family, aqop::FeatureSet>> rows = aqop::report_grid_rows();
  if (j.contains("rows")) {
    rows.clear();
    for (const auto& r : j.at("rows")) {
      rows.push_back({aqop::parse_family(r.at(0).get<std::string>()),
                      aqop::parse_feature_set(r.at(1).get<std::string>())});
    }
    j.erase("rows");
  }
  j.erase("target");
  j.erase("family");
  j.erase("features");

  auto base = aqop::ExperimentConfig::from_json_text(j.dump());
  apply_env_data_root(base);
  if (seed) base.seed = *seed;
  if (!out_dir.empty()) base.out_dir = out_dir;

  std::vector<std::string> run_dirs;
  int skipped = 0;
  for (const auto& target : targets) {
    for (const auto& [family, features] : rows) {
      auto cfg = base;
      cfg.target = aqop::parse_target(target);
      cfg.family = family;
      cfg.features = features;
      if ((family == aqop::Family::Transfer || family == aqop::Family::Finetune) &&
          !cfg.imagenet_weights) {
        std::cerr << "skip " << cfg.run_name() << ": no imagenet_weights configured\n";
        ++skipped;
        continue;
      }
      if (family == aqop::Family::SimSiamBJ && !cfg.simsiam_bj_weights) {
        std::cerr << "skip " << cfg.run_name() << ": no simsiam_bj_weights configured\n";
        ++skipped;
        continue;
      }
      if (family == aqop::Family::SimSiamDL && !cfg.simsiam_dl_weights) {
        std::cerr << "skip " << cfg.run_name() << ": no simsiam_dl_weights configured\n";
        ++skipped;
        continue;
      }
      std::cout << "=== " << cfg.run_name() << " ===\n";
      auto art = aqop::run_experiment(cfg);
      print_run(art);
      run_dirs.push_back(art.run_dir);
    }
  }
  if (run_dirs.empty()) throw aqop::Error("matrix: every cell was skipped");
  const auto report_path = (fs::path(base.out_dir) / "report.csv").string();
  aqop::emit_report(run_dirs, report_path);
  std::cout << "report: " << report_path << " (" << run_dirs.size() << " runs, " << skipped
            << " skipped)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Daily particulate-matter and oxidative-potential estimation from satellite "
               "image patches and meteorology"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string runs_root;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    sub->add_option("-c,--config", config_path, "JSON config file")->required(config_required);
    sub->add_option("-s,--seed", seed, "override the config seed");
    sub->add_option("-o,--out", out_dir, "output directory");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with known ground truth");
  add_common(synth, false);
  auto* prepare = app.add_subcommand("prepare", "validate a data root and report corpus counts");
  add_common(prepare, true);
  auto* pretrain = app.add_subcommand("pretrain", "contrastive pre-training of the backbone");
  add_common(pretrain, true);
  auto* train = app.add_subcommand("train", "train and evaluate one model");
  add_common(train, true);
  auto* matrix = app.add_subcommand("matrix", "run a grid of models and emit the report");
  add_common(matrix, true);
  auto* report = app.add_subcommand("report", "aggregate finished runs into one report");
  report->add_option("-r,--runs", runs_root, "directory tree containing runs")->required();
  report->add_option("-o,--out", out_dir, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      if (out_dir.empty()) throw aqop::Error("synth: --out is required");
      auto cfg = config_path.empty() ? aqop::SynthConfig{}
                                     : parse_synth_config(read_json_file(config_path));
      if (seed) cfg.seed = *seed;
      auto corpus = aqop::generate_corpus(cfg);
      aqop::write_corpus(corpus, cfg, out_dir);
      std::cout << "synthetic corpus: " << corpus.records.size() << " station-days in "
                << out_dir << "\n";
    } else if (prepare->parsed()) {
      json j = read_json_file(config_path);
      const std::string data_root = env_or(j.value("data_root", ""));
      const auto image_type = aqop::parse_image_type(j.value("image_type", "RGB"));
      const std::uint64_t s = seed ? *seed : j.value("seed", std::uint64_t{0});
      std::string summary_path;
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        summary_path = (fs::path(out_dir) / "prepare_summary.json").string();
      }
      auto summary = aqop::prepare_corpus(data_root, image_type, s, summary_path);
      std::cout << "scenes: " << summary.scenes_clear << "/" << summary.scenes_total
                << " clear, records: " << summary.records << ", dates: " << summary.train_dates
                << "/" << summary.val_dates << "/" << summary.test_dates
                << " train/val/test\n";
      for (const auto& [why, n] : summary.reject_reasons) {
        std::cout << "  rejected " << n << ": " << why << "\n";
      }
    } else if (pretrain->parsed()) {
      auto cfg = aqop::ExperimentConfig::from_json_file(config_path);
      apply_env_data_root(cfg);
      if (seed) cfg.seed = *seed;
      if (out_dir.empty()) throw aqop::Error("pretrain: --out is required");
      fs::create_directories(out_dir);
      const auto out_path = (fs::path(out_dir) / "pretrained_backbone.aqt").string();
      auto trace = aqop::pretrain_backbone(cfg, out_path);
      std::cout << "pretrained " << trace.size() << " epochs, final loss "
                << aqop::format_double(trace.back().first, 4) << ", repr std "
                << aqop::format_double(trace.back().second, 4) << " -> " << out_path << "\n";
    } else if (train->parsed()) {
      auto cfg = aqop::ExperimentConfig::from_json_file(config_path);
      apply_env_data_root(cfg);
      if (seed) cfg.seed = *seed;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      print_run(aqop::run_experiment(cfg));
    } else if (matrix->parsed()) {
      return run_matrix(config_path, seed, out_dir);
    } else if (report->parsed()) {
      aqop::emit_report_from_tree(runs_root, out_dir);
      std::cout << "report: " << out_dir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
