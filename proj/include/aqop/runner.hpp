// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aqop/metrics.hpp"
#include "aqop/types.hpp"

namespace aqop {

enum class Family { Baseline, Random, Transfer, Finetune, SimSiam, SimSiamBJ, SimSiamDL };
Family parse_family(const std::string& s);
std::string to_string(Family f);

enum class FeatureSet { M, I, IM, IH };
FeatureSet parse_feature_set(const std::string& s);  // "M", "I", "I+M", "I+H"
std::string to_string(FeatureSet f);

inline std::ostream& operator<<(std::ostream& os, Family f) { return os << to_string(f); }
inline std::ostream& operator<<(std::ostream& os, FeatureSet f) { return os << to_string(f); }

struct ExperimentConfig {
  Target target = Target::PM10;
  Family family = Family::Baseline;
  FeatureSet features = FeatureSet::M;
  ImageType image_type = ImageType::RGB;
  std::uint64_t seed = 0;

  std::string data_root;  // dir with scenes.csv, met.csv, aq.csv, cloud_filter.json
  std::string out_dir;
  std::optional<std::string> imagenet_weights;
  std::optional<std::string> simsiam_bj_weights;
  std::optional<std::string> simsiam_dl_weights;

  // Training knobs; defaults follow the experimental protocol.
  int max_epochs = 150;
  std::optional<int> patience = 25;  // forced off for the baseline family
  int batch_size = 32;
  int pretrain_epochs = 100;
  bool pretrain_all_scenes = false;  // include val/test scenes in SimSiam corpus
  int bootstrap_b = 1000;

  // Parse one experiment from a JSON config file; --seed/--out/-data
  // overrides and the AQOP_DATA_ROOT environment variable are applied by
  // the CLI layer.
  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text);
  std::string to_json() const;    // resolved snapshot
  std::string run_name() const;   // e.g. "transfer_I+M_op_aa_RGB_seed1"
  std::uint32_t hash() const;     // config hash embedded in every artifact

  void validate() const;
};

struct RunArtifacts {
  std::string run_dir;
  std::string checkpoint_path;
  std::vector<MetricsReport> reports;  // train/val/test
  std::vector<BootstrapCI> cis;        // test split: r2, rmse, nmae
  double station_skill = 0;            // test split NMAE of station means
  int best_epoch = 0;
  std::uint32_t config_hash = 0;
};

RunArtifacts run_experiment(const ExperimentConfig& config);

// Standalone contrastive pre-training: random-initialized backbone trained
// on the clear train-split scenes (or all clear scenes when
// pretrain_all_scenes is set), saved to out_archive. Returns the per-epoch
// loss and collapse-monitor trace.
std::vector<std::pair<double, double>> pretrain_backbone(const ExperimentConfig& config,
                                                         const std::string& out_archive);

// Validates a data root (manifests readable, filter config parses, at least
// one clear scene) and reports corpus counts. `out_summary_json`, when
// non-empty, receives the summary as JSON.
struct PrepareSummary {
  std::size_t scenes_total = 0;   // scenes of the image type, before filtering
  std::size_t scenes_clear = 0;   // passing the filter, deduplicated
  std::size_t records = 0;        // joined station-day records
  std::size_t train_dates = 0;
  std::size_t val_dates = 0;
  std::size_t test_dates = 0;
  std::map<std::string, int> reject_reasons;
};
PrepareSummary prepare_corpus(const std::string& data_root, ImageType image_type,
                              std::uint64_t seed, const std::string& out_summary_json = "");

// The full model/feature grid used by the consolidated report and the
// `matrix` subcommand, in presentation row order.
std::vector<std::pair<Family, FeatureSet>> report_grid_rows();

// Consolidated report: rows = model x features, column groups = targets
// (op_aa, op_dtt, pm10), cells = R2/RMSE/NMAE at 4 significant digits.
void emit_report(const std::vector<std::string>& run_dirs, const std::string& out_csv);

// Scans a directory tree for runs (metrics.csv files) and aggregates.
void emit_report_from_tree(const std::string& runs_root, const std::string& out_csv);

}  // namespace aqop
