// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "aqop/dataset.hpp"
#include "aqop/raster.hpp"

namespace aqop {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double quantile_of(const torch::Tensor& band, double q) {
  return torch::quantile(band.flatten().to(torch::kFloat64), q).item<double>();
}

std::string station_name(int k) { return "S" + std::to_string(k + 1); }

}  // namespace

torch::Tensor make_base_texture(int channels, std::uint64_t seed) {
  Rng rng(seed);
  const auto n = kPatchSize;
  auto ys = torch::arange(n, torch::kFloat32).view({n, 1}).expand({n, n}) / n;
  auto xs = torch::arange(n, torch::kFloat32).view({1, n}).expand({n, n}) / n;

  auto texture = torch::empty({channels, n, n}, torch::kFloat32);
  for (int c = 0; c < channels; ++c) {
    auto field = torch::zeros({n, n}, torch::kFloat32);
    // Gaussian blobs
    const int n_blobs = 6 + static_cast<int>(rng.below(5));
    for (int b = 0; b < n_blobs; ++b) {
      const float cx = static_cast<float>(rng.uniform());
      const float cy = static_cast<float>(rng.uniform());
      const float sigma = static_cast<float>(rng.uniform(0.05, 0.2));
      const float amp = static_cast<float>(rng.uniform(0.3, 1.0));
      auto d2 = (xs - cx).pow(2) + (ys - cy).pow(2);
      field += amp * torch::exp(-d2 / (2.0f * sigma * sigma));
    }
    // Oriented stripes
    const float freq = static_cast<float>(rng.uniform(4.0, 14.0));
    const float angle = static_cast<float>(rng.uniform(0.0, std::numbers::pi));
    const float phase = static_cast<float>(rng.uniform(0.0, 2.0 * std::numbers::pi));
    auto proj = xs * std::cos(angle) + ys * std::sin(angle);
    field += 0.5f * (1.0f + torch::sin(2.0f * static_cast<float>(std::numbers::pi) * freq * proj +
                                       phase));
    // Rescale into [0.02, 0.30]
    const auto lo = field.min();
    const auto hi = field.max();
    field = 0.02f + 0.28f * (field - lo) / (hi - lo + 1e-12f);
    texture[c] = field;
  }
  return texture;
}

ScenePatch generate_scene(const torch::Tensor& base_texture, double haze, double season,
                          ImageType image_type, Rng& rng) {
  if (haze < 0 || haze > 1 || season < 0 || season > 1) {
    throw Error("generate_scene: latents must be in [0,1]");
  }
  if (base_texture.size(0) != channel_count(image_type)) {
    throw Error("generate_scene: texture channel count does not match image type");
  }
  const auto h = static_cast<float>(haze);
  auto bands = (1.0f - 0.5f * h) * base_texture + 0.5f * h * static_cast<float>(kSynthWhiteLevel);
  // Per-scene constant brightness jitter; leaves per-channel contrast intact.
  bands = (bands + static_cast<float>(rng.uniform(-0.002, 0.002))).clamp_min(0.0f);
  // Season scales the total NIR radiance, jitter included.
  if (image_type == ImageType::TOAR) {
    bands[3] *= static_cast<float>(1.0 - 0.6 * season);
  }

  ScenePatch patch;
  patch.image_type = image_type;
  patch.instrument = "SYNTH";
  patch.bands = bands;
  return patch;
}

SynthCorpus generate_corpus(const SynthConfig& cfg) {
  if (cfg.n_stations < 1 || cfg.n_days < 1 || cfg.noise_sd < 0) {
    throw Error("generate_corpus: invalid config");
  }
  Rng root(cfg.seed);
  Rng met_rng = root.derive("met");
  Rng haze_rng = root.derive("haze");
  Rng aq_rng = root.derive("aq");

  SynthCorpus corpus;
  corpus.truth.coef_haze = 0.6 * cfg.haze_strength;
  corpus.truth.coef_inv_blh = 0.4;
  corpus.truth.pm10_offset = 4.0;
  corpus.truth.pm10_scale = 40.0;
  corpus.truth.op_aa_offset = 0.2;
  corpus.truth.op_aa_scale = 4.0;
  corpus.truth.op_dtt_offset = 0.15;
  corpus.truth.op_dtt_scale = 3.2;

  for (int d = 0; d < cfg.n_days; ++d) {
    const Date date = cfg.start_date.plus_days(d);
    const double phase = 2.0 * std::numbers::pi * d / 365.25;
    const double season = clamp01(cfg.season_amplitude * 0.5 * (1.0 + std::cos(phase)));
    for (int k = 0; k < cfg.n_stations; ++k) {
      const std::string station = station_name(k);

      MetVector met;
      met.t2m = 288.0 - 16.0 * season + 1.5 * met_rng.normal();
      met.rh = std::clamp(55.0 + 25.0 * season + 5.0 * met_rng.normal(), 5.0, 100.0);
      met.sp = 96000.0 + 200.0 * (season - 0.5) + 300.0 * met_rng.normal();
      met.wind_u = 2.5 * met_rng.normal();
      met.wind_v = 2.5 * met_rng.normal();
      met.blh = std::max(160.0, 1800.0 - 1300.0 * season + 30.0 * k + 120.0 * met_rng.normal());

      const double inv_blh = clamp01(400.0 / met.blh - 0.18);
      const double haze = clamp01(0.45 * season + 0.45 * inv_blh + 0.25 * haze_rng.uniform());
      const double g = corpus.truth.coef_haze * haze + corpus.truth.coef_inv_blh * inv_blh;

      AQObservation aq;
      aq.station_id = station;
      aq.date = date;
      // Clamped to the plausibility thresholds so the outlier filter never
      // drops synthetic records; the noiseless values stay strictly inside,
      // so the affine target/latent relation survives the clamp.
      aq.pm10 = std::clamp(corpus.truth.pm10_offset +
                               corpus.truth.pm10_scale * (g + cfg.noise_sd * aq_rng.normal()),
                           0.0, 50.0);
      aq.op_aa = std::clamp(corpus.truth.op_aa_offset +
                                corpus.truth.op_aa_scale * (g + cfg.noise_sd * aq_rng.normal()),
                            0.0, 6.0);
      aq.op_dtt = std::clamp(
          corpus.truth.op_dtt_offset +
              corpus.truth.op_dtt_scale * (g + cfg.noise_sd * aq_rng.normal()),
          0.0, 5.0);

      SceneMeta meta;
      meta.station_id = station;
      meta.date = date;
      meta.image_type = cfg.image_type;
      meta.instrument = "SYNTH";
      meta.cover = 1.0;
      meta.cloud_cover = 0.0;
      meta.acquired = "10:30:00";
      meta.path = "scenes/" + station + "_" + date.str() + "_" + to_string(cfg.image_type) + ".bin";

      StationDayRecord rec;
      rec.station_id = station;
      rec.date = date;
      rec.met = met;
      rec.scene = meta;  // quantiles filled when the scene is materialized
      rec.aq = aq;

      corpus.truth.rows.push_back({station, date, haze, season, inv_blh, g});
      corpus.met.push_back({{station, date}, met});
      corpus.aq.push_back(aq);
      corpus.scenes.push_back(meta);
      corpus.records.push_back(std::move(rec));
    }
  }
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const SynthConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "scenes");

  Rng root(cfg.seed);
  Rng scene_rng = root.derive("scene");

  std::vector<torch::Tensor> textures;
  for (int k = 0; k < cfg.n_stations; ++k) {
    textures.push_back(
        make_base_texture(channel_count(cfg.image_type), root.derive("texture", k).next_u64()));
  }

  std::vector<SceneMeta> manifest = corpus.scenes;
  const int green_band = 1;  // G is band 1 for both R,G,B and B,G,R,NIR
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& row = corpus.truth.rows[i];
    const int k = std::stoi(manifest[i].station_id.substr(1)) - 1;
    ScenePatch patch =
        generate_scene(textures[k], row.haze, row.season, cfg.image_type, scene_rng);
    patch.station_id = manifest[i].station_id;
    patch.date = manifest[i].date;
    patch.validate();
    manifest[i].green_q05 = quantile_of(patch.bands[green_band], 0.05);
    manifest[i].green_q50 = quantile_of(patch.bands[green_band], 0.50);
    manifest[i].green_q95 = quantile_of(patch.bands[green_band], 0.95);
    write_raster((fs::path(out_dir) / manifest[i].path).string(), patch.bands, cfg.image_type);
  }

  write_scene_manifest((fs::path(out_dir) / "scenes.csv").string(), manifest);
  write_met_csv((fs::path(out_dir) / "met.csv").string(), corpus.met);
  write_aq_csv((fs::path(out_dir) / "aq.csv").string(), corpus.aq);

  // Permissive filter config: synthetic scenes are all fully covered and
  // cloud-free, so branch 1 admits them; date lists stay empty.
  CloudFilterConfig filter;
  filter.save((fs::path(out_dir) / "cloud_filter.json").string());

  nlohmann::json truth;
  truth["coef_haze"] = corpus.truth.coef_haze;
  truth["coef_inv_blh"] = corpus.truth.coef_inv_blh;
  truth["pm10_offset"] = corpus.truth.pm10_offset;
  truth["pm10_scale"] = corpus.truth.pm10_scale;
  truth["op_aa_offset"] = corpus.truth.op_aa_offset;
  truth["op_aa_scale"] = corpus.truth.op_aa_scale;
  truth["op_dtt_offset"] = corpus.truth.op_dtt_offset;
  truth["op_dtt_scale"] = corpus.truth.op_dtt_scale;
  truth["rows"] = nlohmann::json::array();
  for (const auto& r : corpus.truth.rows) {
    truth["rows"].push_back({{"station_id", r.station_id},
                             {"date", r.date.str()},
                             {"haze", r.haze},
                             {"season", r.season},
                             {"inv_blh", r.inv_blh},
                             {"signal", r.signal}});
  }
  std::ofstream out(fs::path(out_dir) / "truth.json");
  out << truth.dump() << "\n";
}

}  // namespace aqop
