// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aqop/rng.hpp"
#include "aqop/types.hpp"

namespace aqop {

MetricsReport compute_metrics(const std::vector<double>& y, const std::vector<double>& yhat) {
  if (y.empty() || y.size() != yhat.size()) {
    throw Error("compute_metrics: vectors must be nonempty and of equal length");
  }
  const auto n = static_cast<double>(y.size());
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / n;

  double ss_res = 0, ss_tot = 0, abs_err = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - yhat[i];
    ss_res += r * r;
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
    abs_err += std::abs(r);
  }
  if (ss_tot == 0.0) throw Error("compute_metrics: zero variance in y, R2 undefined");
  if (ybar == 0.0) throw Error("compute_metrics: zero mean in y, NMAE undefined");

  MetricsReport r;
  r.n = y.size();
  r.r2 = 1.0 - ss_res / ss_tot;
  r.rmse = std::sqrt(ss_res / n);
  r.nmae = abs_err / (n * ybar);
  return r;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const auto n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw Error("spearman: constant vector, correlation undefined");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error("spearman: vectors must be of equal length >= 2");
  }
  return pearson(average_ranks(a), average_ranks(b));
}

double percentile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw Error("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

BootstrapCI bootstrap_ci(const std::vector<double>& y, const std::vector<double>& yhat,
                         const std::string& metric_name, const MetricFn& metric, int b,
                         std::uint64_t seed) {
  if (y.size() != yhat.size() || y.empty()) {
    throw Error("bootstrap_ci: vectors must be nonempty and of equal length");
  }
  if (b < 1) throw Error("bootstrap_ci: B must be >= 1");

  const auto n = y.size();
  Rng rng(seed);
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(b));
  std::vector<double> ry(n), ryhat(n);
  const std::int64_t max_draws = static_cast<std::int64_t>(b) * 10;
  std::int64_t draws = 0;
  while (stats.size() < static_cast<std::size_t>(b)) {
    if (++draws > max_draws) {
      throw Error("bootstrap_ci: metric undefined on too many resamples (cap 10*B)");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(rng.below(n));
      ry[i] = y[j];
      ryhat[i] = yhat[j];
    }
    try {
      stats.push_back(metric(ry, ryhat));
    } catch (const Error&) {
      continue;  // undefined on this resample; redraw
    }
  }

  BootstrapCI ci;
  ci.metric = metric_name;
  ci.point = metric(y, yhat);
  ci.lower = percentile_linear(stats, 2.5);
  ci.upper = percentile_linear(stats, 97.5);
  ci.b = b;
  ci.seed = seed;
  return ci;
}

double station_mean_skill(
    const std::map<std::string, std::vector<std::pair<double, double>>>& series) {
  if (series.empty()) throw Error("station_mean_skill: no stations");
  std::vector<double> mean_obs, mean_est;
  for (const auto& [station, pairs] : series) {
    if (pairs.empty()) throw Error("station_mean_skill: empty station group '" + station + "'");
    double so = 0, se = 0;
    for (const auto& [obs, est] : pairs) {
      so += obs;
      se += est;
    }
    mean_obs.push_back(so / static_cast<double>(pairs.size()));
    mean_est.push_back(se / static_cast<double>(pairs.size()));
  }
  const auto n = static_cast<double>(mean_obs.size());
  const double ybar = std::accumulate(mean_obs.begin(), mean_obs.end(), 0.0) / n;
  if (ybar == 0.0) throw Error("station_mean_skill: zero mean observation");
  double abs_err = 0;
  for (std::size_t i = 0; i < mean_obs.size(); ++i) abs_err += std::abs(mean_obs[i] - mean_est[i]);
  return abs_err / (n * ybar);
}

}  // namespace aqop
