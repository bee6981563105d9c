// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include <array>
#include <cmath>
#include <filesystem>

#include "aqop_doctest.h"

#include "aqop/dataset.hpp"
#include "aqop/raster.hpp"
#include "aqop/rng.hpp"
#include "aqop/synthgen.hpp"
#include "aqop/types.hpp"

using aqop::SynthConfig;

TEST_CASE("corpus generation is deterministic") {
  SynthConfig cfg;
  cfg.n_stations = 2;
  cfg.n_days = 50;
  cfg.seed = 3;
  const auto a = aqop::generate_corpus(cfg);
  const auto b = aqop::generate_corpus(cfg);
  REQUIRE(a.records.size() == b.records.size());
  REQUIRE(a.truth.rows.size() == a.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].met.values() == b.records[i].met.values());
    CHECK(*a.records[i].aq->pm10 == *b.records[i].aq->pm10);
    CHECK(a.truth.rows[i].haze == b.truth.rows[i].haze);
  }
}

TEST_CASE("latents and targets stay in their contracted ranges") {
  SynthConfig cfg;
  cfg.n_stations = 3;
  cfg.n_days = 200;
  cfg.seed = 9;
  const auto corpus = aqop::generate_corpus(cfg);
  for (const auto& row : corpus.truth.rows) {
    CHECK(row.haze >= 0.0);
    CHECK(row.haze <= 1.0);
    CHECK(row.season >= 0.0);
    CHECK(row.season <= 1.0);
    CHECK(row.inv_blh >= 0.0);
    CHECK(row.inv_blh <= 1.0);
  }
  for (const auto& rec : corpus.records) {
    REQUIRE(rec.aq.has_value());
    // Targets are positive and below the plausibility thresholds, so the
    // outlier filter never bites on synthetic data.
    CHECK(*rec.aq->pm10 >= 0.0);
    CHECK(*rec.aq->pm10 <= 50.0);
    CHECK(*rec.aq->op_aa >= 0.0);
    CHECK(*rec.aq->op_aa <= 6.0);
    CHECK(*rec.aq->op_dtt >= 0.0);
    CHECK(*rec.aq->op_dtt <= 5.0);
    CHECK(rec.met.blh >= 160.0);
  }
}

TEST_CASE("winter air quality is worse than summer") {
  SynthConfig cfg;
  cfg.n_stations = 1;
  cfg.n_days = 365;
  cfg.seed = 1;
  const auto corpus = aqop::generate_corpus(cfg);
  double winter = 0, summer = 0;
  int nw = 0, ns = 0;
  for (const auto& rec : corpus.records) {
    if (rec.date.month == 1 || rec.date.month == 12) {
      winter += *rec.aq->pm10;
      ++nw;
    }
    if (rec.date.month == 6 || rec.date.month == 7) {
      summer += *rec.aq->pm10;
      ++ns;
    }
  }
  REQUIRE(nw > 0);
  REQUIRE(ns > 0);
  CHECK(winter / nw > summer / ns);
}

TEST_CASE("haze compresses scene contrast toward the white level") {
  auto texture3 = aqop::make_base_texture(3, 5);
  auto texture = aqop::make_base_texture(4, 5);
  aqop::Rng r1(1), r2(1);
  auto clear = aqop::generate_scene(texture3, 0.0, 0.0, aqop::ImageType::RGB, r1);
  auto hazy = aqop::generate_scene(texture, 1.0, 0.0, aqop::ImageType::TOAR, r2);
  CHECK(clear.bands.size(0) == 3);
  CHECK(hazy.bands.size(0) == 4);

  // At h = 1 the texture contribution is scaled by exactly 0.5; the only
  // other term is a constant, so pixel standard deviation halves.
  const double tex_sd = texture[0].std(/*unbiased=*/false).item<double>();
  const double hazy_sd = hazy.bands[0].std(/*unbiased=*/false).item<double>();
  CHECK(hazy_sd == doctest::Approx(0.5 * tex_sd).epsilon(1e-4));

  // Removing the haze mix leaves a spatially constant residual (the
  // brightness jitter), whatever the haze level.
  auto residual = hazy.bands[0] - 0.5 * texture[0];
  CHECK((residual.max() - residual.min()).item<double>() < 1e-5);

  SUBCASE("season dims the NIR channel only") {
    aqop::Rng r3(1), r4(1);
    auto plain = aqop::generate_scene(texture, 0.3, 0.0, aqop::ImageType::TOAR, r3);
    auto seasonal = aqop::generate_scene(texture, 0.3, 1.0, aqop::ImageType::TOAR, r4);
    CHECK(torch::equal(plain.bands.slice(0, 0, 3), seasonal.bands.slice(0, 0, 3)));
    CHECK(torch::allclose(seasonal.bands[3], plain.bands[3] * 0.4, 1e-5, 1e-6));
  }
}

TEST_CASE("noiseless targets are an exact linear function of the latents") {
  SynthConfig cfg;
  cfg.n_stations = 2;
  cfg.n_days = 120;
  cfg.noise_sd = 0.0;
  cfg.seed = 4;
  const auto corpus = aqop::generate_corpus(cfg);
  const auto& t = corpus.truth;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& row = t.rows[i];
    const double g = t.coef_haze * row.haze + t.coef_inv_blh * row.inv_blh;
    CHECK(row.signal == doctest::Approx(g).epsilon(1e-12));
    const double want_pm10 = t.pm10_offset + t.pm10_scale * g;
    CHECK(*corpus.records[i].aq->pm10 == doctest::Approx(want_pm10).epsilon(1e-12));
    const double want_aa = t.op_aa_offset + t.op_aa_scale * g;
    CHECK(*corpus.records[i].aq->op_aa == doctest::Approx(want_aa).epsilon(1e-12));
  }
}

TEST_CASE("written corpus is ingestible and passes the clear-sky branch") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "aqop_synth_corpus";
  fs::remove_all(dir);
  SynthConfig cfg;
  cfg.n_stations = 2;
  cfg.n_days = 12;
  cfg.seed = 8;
  const auto corpus = aqop::generate_corpus(cfg);
  aqop::write_corpus(corpus, cfg, dir.string());

  const auto scenes = aqop::read_scene_manifest((dir / "scenes.csv").string());
  const auto filter = aqop::CloudFilterConfig::load((dir / "cloud_filter.json").string());
  REQUIRE(scenes.size() == 24);
  for (const auto& s : scenes) {
    CHECK(s.cover == 1.0);
    CHECK(s.cloud_cover == 0.0);
    std::string why;
    CHECK_MESSAGE(aqop::apply_cloud_filter(s, filter, &why), why);
    auto patch = aqop::load_scene(s, dir.string());
    patch.validate();
    CHECK(patch.bands.size(1) == aqop::kPatchSize);
    // The manifest green quantiles match the written pixels.
    const auto green = patch.bands[1].flatten().to(torch::kFloat64);
    const auto q = torch::quantile(green, torch::tensor({0.05, 0.5, 0.95}, torch::kFloat64));
    CHECK(*s.green_q05 == doctest::Approx(q[0].item<double>()).epsilon(1e-6));
    CHECK(*s.green_q50 == doctest::Approx(q[1].item<double>()).epsilon(1e-6));
    CHECK(*s.green_q95 == doctest::Approx(q[2].item<double>()).epsilon(1e-6));
  }
  const auto met = aqop::read_met_csv((dir / "met.csv").string());
  const auto aq = aqop::read_aq_csv((dir / "aq.csv").string());
  const auto records = aqop::build_records(aqop::dedup_scenes(scenes), met, aq);
  CHECK(records.size() == 24);
  for (const auto& r : records) {
    CHECK(r.scene.has_value());
    CHECK(r.aq.has_value());
  }
  fs::remove_all(dir);
}
