// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "aqop/types.hpp"
#include "aqop/rng.hpp"

namespace aqop {

// Configuration of the synthetic corpus generator. The generator is pure:
// the same config yields a byte-identical corpus.
struct SynthConfig {
  int n_stations = 3;
  int n_days = 365;
  double haze_strength = 1.0;    // coefficient linking latent haze to AQ
  double season_amplitude = 1.0; // scales the seasonal component of met and haze
  double noise_sd = 0.05;        // AQ noise, in units of the latent signal g
  std::uint64_t seed = 0;
  ImageType image_type = ImageType::RGB;
  Date start_date = {2020, 1, 1};
};

// Ground truth for one station-day.
struct SynthTruthRow {
  std::string station_id;
  Date date;
  double haze = 0;        // latent haze h in [0,1]
  double season = 0;      // latent season s in [0,1]
  double inv_blh = 0;     // normalized inverse boundary-layer height in [0,1]
  double signal = 0;      // g = a*h + b*inv_blh
};

struct SynthTruth {
  double coef_haze = 0;     // a
  double coef_inv_blh = 0;  // b
  // Per-target affine map: target = offset + scale * (g + noise)
  double pm10_offset = 0, pm10_scale = 0;
  double op_aa_offset = 0, op_aa_scale = 0;
  double op_dtt_offset = 0, op_dtt_scale = 0;
  std::vector<SynthTruthRow> rows;
};

// Procedural base texture (blobs + stripes) for one station, values well
// inside [0, ~0.3] so hazy scenes still pass the quality filter.
torch::Tensor make_base_texture(int channels, std::uint64_t seed);

// Haze compresses contrast toward the white level; season additionally
// dims the NIR channel (TOAR only):
//   out = (1 - 0.5h) * texture + 0.5h * white
//   out[NIR] *= (1 - 0.6s)
ScenePatch generate_scene(const torch::Tensor& base_texture, double haze, double season,
                          ImageType image_type, Rng& rng);

struct SynthCorpus {
  std::vector<StationDayRecord> records;
  SynthTruth truth;
  std::vector<SceneMeta> scenes;
  std::vector<std::pair<std::pair<std::string, Date>, MetVector>> met;
  std::vector<AQObservation> aq;
};

// Generates records in memory. Scene pixel data is written lazily by
// write_corpus; SceneMeta rows carry relative paths under "scenes/".
SynthCorpus generate_corpus(const SynthConfig& config);

// Emits the corpus in the exact manifest/CSV/raster formats the dataset
// module ingests, plus a permissive cloud-filter config, under out_dir.
void write_corpus(const SynthCorpus& corpus, const SynthConfig& config,
                  const std::string& out_dir);

inline constexpr double kSynthWhiteLevel = 0.4;

}  // namespace aqop
