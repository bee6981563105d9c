// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "aqop/types.hpp"

namespace aqop {

// Outlier thresholds: a measure is dropped iff it strictly exceeds its
// threshold. Other measures of the same record survive.
struct OutlierThresholds {
  double pm10 = 50.0;     // µg/m³
  double op_aa = 6.0;     // nmol·min⁻¹·m⁻³
  double op_dtt = 5.0;    // nmol·min⁻¹·m⁻³
};

AQObservation apply_outlier_filter(const AQObservation& aq,
                                   const OutlierThresholds& thresholds = {});

// One exclusion rule for the fully-clear branch of the cloud filter. Empty
// station/instrument fields match any value.
struct SceneExclusion {
  Date date;
  std::string station_id;  // "" = any
  std::string instrument;  // "" = any
};

// Declarative cloud/coverage filter configuration. Thresholds and date
// lists are data, shipped in a JSON config file, not code.
struct CloudFilterConfig {
  // Branch 1: fully covered, zero cloud.
  double clear_green_q05_max = 0.25;
  std::vector<SceneExclusion> clear_exclusions;
  // Branch 2: fully covered, partial cloud, date on the allow list.
  double partial_green_q05_max = 0.25;
  double partial_green_q50_max = 0.26;
  double partial_green_q95_max = 0.5;
  std::set<Date> partial_allow_dates;
  // Branch 3: partial coverage.
  double partial_cover_min = 0.7;
  double partial_cover_green_q95_max = 0.21;

  static CloudFilterConfig load(const std::string& path);
  void save(const std::string& path) const;
};

// True iff the scene satisfies any of the three quality branches.
// Missing quantiles reject the scene; `diagnostic`, when non-null, receives
// the reason for a rejection.
bool apply_cloud_filter(const SceneMeta& meta, const CloudFilterConfig& config,
                        std::string* diagnostic = nullptr);

// Component-wise 24-hour mean. Requires all 24 hourly records (incomplete
// days are unusable); throws Error otherwise.
MetVector aggregate_met(const std::vector<MetVector>& hourly);
bool met_day_complete(std::size_t hours_present);

// Standard bilinear interpolation over one grid cell. Corner values are
// given at (x0,y0), (x1,y0), (x0,y1), (x1,y1); the point must lie inside.
double bilinear_interpolate(double x0, double y0, double x1, double y1,
                            double v00, double v10, double v01, double v11,
                            double x, double y);

// Random per-date partition. Sizes: n_val = floor(ratio_val*N),
// n_test = floor(ratio_test*N), remainder to train. Deterministic per seed.
SplitAssignment assign_splits(const std::set<Date>& dates,
                              const std::array<double, 3>& ratios,  // train, val, test
                              std::uint64_t seed);

// Per-channel mean/std pooled over all pixels of the given train-split
// scenes. Population convention (divide by N). Throws on a zero-variance
// channel or on fewer than two scenes.
NormStats compute_norm_stats(const std::vector<const ScenePatch*>& train_scenes,
                             ImageType image_type);

ScenePatch normalize(const ScenePatch& scene, const NormStats& stats);
ScenePatch denormalize(const ScenePatch& scene, const NormStats& stats);
torch::Tensor normalize_bands(const torch::Tensor& bands, const NormStats& stats);

// Keeps at most one scene per (station, date): lowest cloud_cover wins,
// ties broken by latest acquisition time.
std::vector<SceneMeta> dedup_scenes(const std::vector<SceneMeta>& scenes);

// Manifest IO (see README for the column contracts).
std::vector<SceneMeta> read_scene_manifest(const std::string& path);
void write_scene_manifest(const std::string& path, const std::vector<SceneMeta>& scenes);
std::vector<std::pair<std::pair<std::string, Date>, MetVector>> read_met_csv(
    const std::string& path);
std::vector<AQObservation> read_aq_csv(const std::string& path);
void write_met_csv(const std::string& path,
                   const std::vector<std::pair<std::pair<std::string, Date>, MetVector>>& rows);
void write_aq_csv(const std::string& path, const std::vector<AQObservation>& rows);

// Joins scenes (filtered, deduplicated), met, and AQ into station-day
// records. Every record needs a met vector; scene and AQ are optional.
std::vector<StationDayRecord> build_records(
    const std::vector<SceneMeta>& clear_scenes,
    const std::vector<std::pair<std::pair<std::string, Date>, MetVector>>& met,
    const std::vector<AQObservation>& aq);

}  // namespace aqop
