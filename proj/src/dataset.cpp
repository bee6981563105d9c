// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "aqop/csv.hpp"
#include "aqop/rng.hpp"

namespace aqop {

namespace {

std::optional<double> drop_if_above(const std::optional<double>& v, double threshold) {
  if (v && *v > threshold) return std::nullopt;
  return v;
}

}  // namespace

AQObservation apply_outlier_filter(const AQObservation& aq, const OutlierThresholds& t) {
  AQObservation out = aq;
  out.pm10 = drop_if_above(aq.pm10, t.pm10);
  out.op_aa = drop_if_above(aq.op_aa, t.op_aa);
  out.op_dtt = drop_if_above(aq.op_dtt, t.op_dtt);
  return out;
}

CloudFilterConfig CloudFilterConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open cloud filter config: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  CloudFilterConfig c;
  c.clear_green_q05_max = j.value("clear_green_q05_max", c.clear_green_q05_max);
  c.partial_green_q05_max = j.value("partial_green_q05_max", c.partial_green_q05_max);
  c.partial_green_q50_max = j.value("partial_green_q50_max", c.partial_green_q50_max);
  c.partial_green_q95_max = j.value("partial_green_q95_max", c.partial_green_q95_max);
  c.partial_cover_min = j.value("partial_cover_min", c.partial_cover_min);
  c.partial_cover_green_q95_max =
      j.value("partial_cover_green_q95_max", c.partial_cover_green_q95_max);
  for (const auto& e : j.value("clear_exclusions", nlohmann::json::array())) {
    SceneExclusion x;
    x.date = Date::parse(e.at("date").get<std::string>());
    x.station_id = e.value("station_id", "");
    x.instrument = e.value("instrument", "");
    c.clear_exclusions.push_back(std::move(x));
  }
  for (const auto& d : j.value("partial_allow_dates", nlohmann::json::array())) {
    c.partial_allow_dates.insert(Date::parse(d.get<std::string>()));
  }
  return c;
}

void CloudFilterConfig::save(const std::string& path) const {
  nlohmann::json j;
  j["clear_green_q05_max"] = clear_green_q05_max;
  j["partial_green_q05_max"] = partial_green_q05_max;
  j["partial_green_q50_max"] = partial_green_q50_max;
  j["partial_green_q95_max"] = partial_green_q95_max;
  j["partial_cover_min"] = partial_cover_min;
  j["partial_cover_green_q95_max"] = partial_cover_green_q95_max;
  j["clear_exclusions"] = nlohmann::json::array();
  for (const auto& x : clear_exclusions) {
    nlohmann::json e{{"date", x.date.str()}};
    if (!x.station_id.empty()) e["station_id"] = x.station_id;
    if (!x.instrument.empty()) e["instrument"] = x.instrument;
    j["clear_exclusions"].push_back(std::move(e));
  }
  j["partial_allow_dates"] = nlohmann::json::array();
  for (const auto& d : partial_allow_dates) j["partial_allow_dates"].push_back(d.str());
  std::ofstream out(path);
  if (!out) throw Error("cannot write cloud filter config: " + path);
  out << j.dump(2) << "\n";
}

bool apply_cloud_filter(const SceneMeta& meta, const CloudFilterConfig& c,
                        std::string* diagnostic) {
  auto reject = [&](const std::string& why) {
    if (diagnostic) *diagnostic = why;
    return false;
  };
  if (!meta.green_q05 || !meta.green_q50 || !meta.green_q95) {
    return reject("missing green reflectance quantiles");
  }
  const double q05 = *meta.green_q05;
  const double q50 = *meta.green_q50;
  const double q95 = *meta.green_q95;

  // Branch 1: fully covered, zero cloud, dark enough, not excluded.
  if (meta.cover == 1.0 && meta.cloud_cover == 0.0 && q05 < c.clear_green_q05_max) {
    const bool excluded = std::any_of(
        c.clear_exclusions.begin(), c.clear_exclusions.end(), [&](const SceneExclusion& x) {
          return x.date == meta.date &&
                 (x.station_id.empty() || x.station_id == meta.station_id) &&
                 (x.instrument.empty() || x.instrument == meta.instrument);
        });
    if (!excluded) return true;
  }

  // Branch 2: fully covered, partial cloud, quantile bounds, allow-listed date.
  if (meta.cover == 1.0 && meta.cloud_cover > 0.0 && meta.cloud_cover < 1.0 &&
      q05 < c.partial_green_q05_max && q50 < c.partial_green_q50_max &&
      q95 < c.partial_green_q95_max && c.partial_allow_dates.count(meta.date) > 0) {
    return true;
  }

  // Branch 3: partial coverage, dark q95.
  if (meta.cover > c.partial_cover_min && meta.cover < 1.0 &&
      q95 < c.partial_cover_green_q95_max) {
    return true;
  }

  return reject("no quality branch satisfied");
}

bool met_day_complete(std::size_t hours_present) { return hours_present == 24; }

MetVector aggregate_met(const std::vector<MetVector>& hourly) {
  if (!met_day_complete(hourly.size())) {
    throw Error("incomplete met day: " + std::to_string(hourly.size()) + " of 24 hours present");
  }
  std::array<double, MetVector::kDim> sum{};
  for (const auto& h : hourly) {
    const auto v = h.values();
    for (int i = 0; i < MetVector::kDim; ++i) sum[i] += v[i];
  }
  for (auto& s : sum) s /= static_cast<double>(hourly.size());
  return MetVector::from_values(sum);
}

double bilinear_interpolate(double x0, double y0, double x1, double y1, double v00, double v10,
                            double v01, double v11, double x, double y) {
  if (x1 <= x0 || y1 <= y0) throw Error("bilinear: degenerate cell");
  if (x < x0 || x > x1 || y < y0 || y > y1) throw Error("bilinear: point outside cell");
  const double tx = (x - x0) / (x1 - x0);
  const double ty = (y - y0) / (y1 - y0);
  return v00 * (1 - tx) * (1 - ty) + v10 * tx * (1 - ty) + v01 * (1 - tx) * ty + v11 * tx * ty;
}

SplitAssignment assign_splits(const std::set<Date>& dates, const std::array<double, 3>& ratios,
                              std::uint64_t seed) {
  if (dates.empty()) throw Error("assign_splits: empty date set");
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) throw Error("assign_splits: ratios must sum to 1");

  std::vector<Date> order(dates.begin(), dates.end());
  Rng rng(seed);
  rng.shuffle(order);

  const auto n = order.size();
  const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::floor(ratios[2] * static_cast<double>(n)));
  const auto n_train = n - n_val - n_test;  // remainder to train

  SplitAssignment sa;
  sa.by_date.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Split s = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
    sa.by_date.emplace_back(order[i], s);
  }
  std::sort(sa.by_date.begin(), sa.by_date.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return sa;
}

NormStats compute_norm_stats(const std::vector<const ScenePatch*>& train_scenes,
                             ImageType image_type) {
  if (train_scenes.size() < 2) throw Error("compute_norm_stats: need at least 2 scenes");
  const int c = channel_count(image_type);
  std::vector<double> sum(c, 0.0), sumsq(c, 0.0);
  std::int64_t n_pixels = 0;
  for (const auto* scene : train_scenes) {
    if (scene->image_type != image_type || scene->bands.size(0) != c) {
      throw Error("compute_norm_stats: scene channel count mismatch");
    }
    auto b = scene->bands.to(torch::kFloat64);
    auto s = b.sum({1, 2});
    auto s2 = (b * b).sum({1, 2});
    for (int i = 0; i < c; ++i) {
      sum[i] += s[i].item<double>();
      sumsq[i] += s2[i].item<double>();
    }
    n_pixels += scene->bands.size(1) * scene->bands.size(2);
  }
  NormStats stats;
  stats.image_type = image_type;
  stats.mean.resize(c);
  stats.std.resize(c);
  for (int i = 0; i < c; ++i) {
    stats.mean[i] = sum[i] / static_cast<double>(n_pixels);
    const double var = sumsq[i] / static_cast<double>(n_pixels) - stats.mean[i] * stats.mean[i];
    stats.std[i] = std::sqrt(std::max(var, 0.0));
    if (stats.std[i] <= 0.0) {
      throw Error("compute_norm_stats: zero variance in channel " + std::to_string(i));
    }
  }
  return stats;
}

torch::Tensor normalize_bands(const torch::Tensor& bands, const NormStats& stats) {
  if (bands.size(0) != static_cast<std::int64_t>(stats.mean.size())) {
    throw Error("normalize: channel count mismatch");
  }
  auto mean = torch::tensor(stats.mean, torch::kFloat32).view({-1, 1, 1});
  auto std = torch::tensor(stats.std, torch::kFloat32).view({-1, 1, 1});
  return (bands - mean) / std;
}

ScenePatch normalize(const ScenePatch& scene, const NormStats& stats) {
  ScenePatch out = scene;
  out.bands = normalize_bands(scene.bands, stats);
  return out;
}

ScenePatch denormalize(const ScenePatch& scene, const NormStats& stats) {
  if (scene.bands.size(0) != static_cast<std::int64_t>(stats.mean.size())) {
    throw Error("denormalize: channel count mismatch");
  }
  auto mean = torch::tensor(stats.mean, torch::kFloat32).view({-1, 1, 1});
  auto std = torch::tensor(stats.std, torch::kFloat32).view({-1, 1, 1});
  ScenePatch out = scene;
  out.bands = scene.bands * std + mean;
  return out;
}

std::vector<SceneMeta> dedup_scenes(const std::vector<SceneMeta>& scenes) {
  std::map<std::pair<std::string, std::int64_t>, SceneMeta> best;
  for (const auto& s : scenes) {
    const auto key = std::make_pair(s.station_id, s.date.to_days());
    auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(key, s);
      continue;
    }
    const SceneMeta& cur = it->second;
    if (s.cloud_cover < cur.cloud_cover ||
        (s.cloud_cover == cur.cloud_cover && s.acquired > cur.acquired)) {
      it->second = s;
    }
  }
  std::vector<SceneMeta> out;
  out.reserve(best.size());
  for (auto& [k, v] : best) out.push_back(std::move(v));
  return out;
}

std::vector<SceneMeta> read_scene_manifest(const std::string& path) {
  CsvTable t = CsvTable::read_file(path);
  std::vector<SceneMeta> out;
  out.reserve(t.num_rows());
  for (std::size_t i = 0; i < t.num_rows(); ++i) {
    SceneMeta m;
    m.station_id = t.cell(i, "station_id");
    m.date = Date::parse(t.cell(i, "date"));
    m.image_type = parse_image_type(t.cell(i, "image_type"));
    m.instrument = t.cell(i, "instrument");
    m.cover = t.cell_double(i, "cover").value_or(0.0);
    m.cloud_cover = t.cell_double(i, "cloud_cover").value_or(0.0);
    m.green_q05 = t.cell_double(i, "green_q05");
    m.green_q50 = t.cell_double(i, "green_q50");
    m.green_q95 = t.cell_double(i, "green_q95");
    m.path = t.cell(i, "path");
    if (t.has_column("acquired")) m.acquired = t.cell(i, "acquired");
    out.push_back(std::move(m));
  }
  return out;
}

void write_scene_manifest(const std::string& path, const std::vector<SceneMeta>& scenes) {
  CsvTable t = CsvTable::from_header({"station_id", "date", "image_type", "instrument", "cover",
                                      "cloud_cover", "green_q05", "green_q50", "green_q95", "path",
                                      "acquired"});
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const auto& m : scenes) {
    t.append_row({m.station_id, m.date.str(), to_string(m.image_type), m.instrument,
                  format_double(m.cover), format_double(m.cloud_cover), opt(m.green_q05),
                  opt(m.green_q50), opt(m.green_q95), m.path, m.acquired});
  }
  t.write_file(path);
}

std::vector<std::pair<std::pair<std::string, Date>, MetVector>> read_met_csv(
    const std::string& path) {
  CsvTable t = CsvTable::read_file(path);
  std::vector<std::pair<std::pair<std::string, Date>, MetVector>> out;
  out.reserve(t.num_rows());
  for (std::size_t i = 0; i < t.num_rows(); ++i) {
    std::array<double, MetVector::kDim> v{};
    for (int k = 0; k < MetVector::kDim; ++k) {
      auto cell = t.cell_double(i, MetVector::names()[k]);
      if (!cell || !std::isfinite(*cell)) {
        throw Error("met CSV: missing or non-finite " + MetVector::names()[k] + " in row " +
                    std::to_string(i));
      }
      v[k] = *cell;
    }
    out.push_back({{t.cell(i, "station_id"), Date::parse(t.cell(i, "date"))},
                   MetVector::from_values(v)});
  }
  return out;
}

void write_met_csv(const std::string& path,
                   const std::vector<std::pair<std::pair<std::string, Date>, MetVector>>& rows) {
  std::vector<std::string> cols = {"station_id", "date"};
  for (const auto& n : MetVector::names()) cols.push_back(n);
  CsvTable t = CsvTable::from_header(cols);
  for (const auto& [key, met] : rows) {
    std::vector<std::string> row = {key.first, key.second.str()};
    for (double v : met.values()) row.push_back(format_double(v));
    t.append_row(std::move(row));
  }
  t.write_file(path);
}

std::vector<AQObservation> read_aq_csv(const std::string& path) {
  CsvTable t = CsvTable::read_file(path);
  std::vector<AQObservation> out;
  out.reserve(t.num_rows());
  for (std::size_t i = 0; i < t.num_rows(); ++i) {
    AQObservation aq;
    aq.station_id = t.cell(i, "station_id");
    aq.date = Date::parse(t.cell(i, "date"));
    aq.pm10 = t.cell_double(i, "pm10");
    aq.op_aa = t.cell_double(i, "op_aa");
    aq.op_dtt = t.cell_double(i, "op_dtt");
    for (const auto& v : {aq.pm10, aq.op_aa, aq.op_dtt}) {
      if (v && (*v < 0 || !std::isfinite(*v))) {
        throw Error("AQ CSV: negative or non-finite measure in row " + std::to_string(i));
      }
    }
    out.push_back(std::move(aq));
  }
  return out;
}

void write_aq_csv(const std::string& path, const std::vector<AQObservation>& rows) {
  CsvTable t = CsvTable::from_header({"station_id", "date", "pm10", "op_aa", "op_dtt"});
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  for (const auto& aq : rows) {
    t.append_row({aq.station_id, aq.date.str(), opt(aq.pm10), opt(aq.op_aa), opt(aq.op_dtt)});
  }
  t.write_file(path);
}

std::vector<StationDayRecord> build_records(
    const std::vector<SceneMeta>& clear_scenes,
    const std::vector<std::pair<std::pair<std::string, Date>, MetVector>>& met,
    const std::vector<AQObservation>& aq) {
  using Key = std::pair<std::string, std::int64_t>;
  std::map<Key, StationDayRecord> records;
  for (const auto& [key, m] : met) {
    const Key k{key.first, key.second.to_days()};
    if (records.count(k)) throw Error("duplicate met row for " + key.first + " " + key.second.str());
    StationDayRecord r;
    r.station_id = key.first;
    r.date = key.second;
    r.met = m;
    records.emplace(k, std::move(r));
  }
  for (const auto& s : clear_scenes) {
    const Key k{s.station_id, s.date.to_days()};
    auto it = records.find(k);
    if (it == records.end()) continue;  // scene without met is unusable
    if (it->second.scene) {
      throw Error("multiple scenes for " + s.station_id + " " + s.date.str() +
                  " after dedup; run dedup_scenes first");
    }
    it->second.scene = s;
  }
  for (const auto& a : aq) {
    const Key k{a.station_id, a.date.to_days()};
    auto it = records.find(k);
    if (it == records.end()) continue;
    it->second.aq = a;
  }
  std::vector<StationDayRecord> out;
  out.reserve(records.size());
  for (auto& [k, v] : records) out.push_back(std::move(v));
  return out;
}

}  // namespace aqop
