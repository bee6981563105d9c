// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace aqop {

struct MetricsReport {
  double r2 = 0;
  double rmse = 0;  // target units
  double nmae = 0;  // fraction of the mean observation
  std::string split;
  std::string target;
  std::string model;
  std::size_t n = 0;
};

//   R²   = 1 - Σ(y-ŷ)² / Σ(y-ȳ)²
//   RMSE = sqrt(Σ(y-ŷ)² / n)
//   NMAE = Σ|y-ŷ| / (n·ȳ)
// Throws when y has zero variance (R² undefined) or zero mean (NMAE
// undefined).
MetricsReport compute_metrics(const std::vector<double>& y, const std::vector<double>& yhat);

// Spearman rank correlation; ties receive average ranks. Throws on a
// constant input vector.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct BootstrapCI {
  std::string metric;
  double point = 0;
  double lower = 0;
  double upper = 0;
  int b = 1000;
  std::uint64_t seed = 0;
};

using MetricFn = std::function<double(const std::vector<double>&, const std::vector<double>&)>;

// Percentile bootstrap: resamples (y, ŷ) index pairs with replacement,
// recomputes the metric, and returns linear-interpolated 2.5/97.5
// percentiles. A resample on which the metric is undefined is redrawn, with
// a cap of 10·B redraws. The resampling unit is the individual observation.
BootstrapCI bootstrap_ci(const std::vector<double>& y, const std::vector<double>& yhat,
                         const std::string& metric_name, const MetricFn& metric, int b,
                         std::uint64_t seed);

// Linear-interpolated percentile of a sample, p in [0, 100].
double percentile_linear(std::vector<double> values, double p);

// NMAE across stations of the per-station mean observed vs mean estimated
// values. Series maps station id -> (observed, estimated) pairs.
double station_mean_skill(
    const std::map<std::string, std::vector<std::pair<double, double>>>& series);

}  // namespace aqop
