// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include <zlib.h>

#include <json.hpp>

#include "aqop/backbone.hpp"
#include "aqop/contrastive.hpp"
#include "aqop/csv.hpp"
#include "aqop/dataset.hpp"
#include "aqop/head.hpp"
#include "aqop/metembed.hpp"
#include "aqop/raster.hpp"
#include "aqop/rng.hpp"
#include "aqop/svgplot.hpp"
#include "aqop/tensor_archive.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace aqop {

Family parse_family(const std::string& s) {
  if (s == "baseline") return Family::Baseline;
  if (s == "random") return Family::Random;
  if (s == "transfer") return Family::Transfer;
  if (s == "finetune") return Family::Finetune;
  if (s == "simsiam") return Family::SimSiam;
  if (s == "simsiam_bj") return Family::SimSiamBJ;
  if (s == "simsiam_dl") return Family::SimSiamDL;
  throw Error("unknown model family: " + s);
}

std::string to_string(Family f) {
  switch (f) {
    case Family::Baseline: return "baseline";
    case Family::Random: return "random";
    case Family::Transfer: return "transfer";
    case Family::Finetune: return "finetune";
    case Family::SimSiam: return "simsiam";
    case Family::SimSiamBJ: return "simsiam_bj";
    case Family::SimSiamDL: return "simsiam_dl";
  }
  throw Error("bad family");
}

FeatureSet parse_feature_set(const std::string& s) {
  if (s == "M") return FeatureSet::M;
  if (s == "I") return FeatureSet::I;
  if (s == "I+M") return FeatureSet::IM;
  if (s == "I+H") return FeatureSet::IH;
  throw Error("unknown feature set: " + s + " (expected M, I, I+M, or I+H)");
}

std::string to_string(FeatureSet f) {
  switch (f) {
    case FeatureSet::M: return "M";
    case FeatureSet::I: return "I";
    case FeatureSet::IM: return "I+M";
    case FeatureSet::IH: return "I+H";
  }
  throw Error("bad feature set");
}

namespace {

bool uses_images(FeatureSet f) { return f != FeatureSet::M; }
bool uses_met(FeatureSet f) { return f == FeatureSet::M || f == FeatureSet::IM; }
bool uses_embedding(FeatureSet f) { return f == FeatureSet::IH; }

bool backbone_is_trained_here(Family f) {
  return f == Family::Finetune || f == Family::SimSiam || f == Family::SimSiamBJ ||
         f == Family::SimSiamDL;
}

std::uint64_t sub_seed(std::uint64_t root, const std::string& tag) {
  return Rng(root).derive(tag).next_u64();
}

std::string display_model_name(Family f) {
  switch (f) {
    case Family::Baseline: return "Baseline";
    case Family::Random: return "Random";
    case Family::Transfer: return "Transfer";
    case Family::Finetune: return "Fine-tuning";
    case Family::SimSiam: return "SimSiam";
    case Family::SimSiamBJ: return "SimSiam BJ";
    case Family::SimSiamDL: return "SimSiam DL";
  }
  throw Error("bad family");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }
  static const std::set<std::string> known = {
      "target",         "family",          "features",          "image_type",
      "seed",           "data_root",       "out_dir",           "imagenet_weights",
      "simsiam_bj_weights", "simsiam_dl_weights", "max_epochs",  "patience",
      "batch_size",     "pretrain_epochs", "pretrain_all_scenes", "bootstrap_b"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw Error("config: unknown key '" + it.key() + "'");
  }
  ExperimentConfig c;
  if (j.contains("target")) c.target = parse_target(j.at("target").get<std::string>());
  if (j.contains("family")) c.family = parse_family(j.at("family").get<std::string>());
  if (j.contains("features")) c.features = parse_feature_set(j.at("features").get<std::string>());
  if (j.contains("image_type")) c.image_type = parse_image_type(j.at("image_type").get<std::string>());
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("data_root")) c.data_root = j.at("data_root").get<std::string>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("imagenet_weights")) c.imagenet_weights = j.at("imagenet_weights").get<std::string>();
  if (j.contains("simsiam_bj_weights"))
    c.simsiam_bj_weights = j.at("simsiam_bj_weights").get<std::string>();
  if (j.contains("simsiam_dl_weights"))
    c.simsiam_dl_weights = j.at("simsiam_dl_weights").get<std::string>();
  if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<int>();
  if (j.contains("patience")) {
    if (j.at("patience").is_null()) c.patience = std::nullopt;
    else c.patience = j.at("patience").get<int>();
  }
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("pretrain_epochs")) c.pretrain_epochs = j.at("pretrain_epochs").get<int>();
  if (j.contains("pretrain_all_scenes"))
    c.pretrain_all_scenes = j.at("pretrain_all_scenes").get<bool>();
  if (j.contains("bootstrap_b")) c.bootstrap_b = j.at("bootstrap_b").get<int>();
  return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["target"] = aqop::to_string(target);
  j["family"] = aqop::to_string(family);
  j["features"] = aqop::to_string(features);
  j["image_type"] = aqop::to_string(image_type);
  j["seed"] = seed;
  j["data_root"] = data_root;
  j["out_dir"] = out_dir;
  if (imagenet_weights) j["imagenet_weights"] = *imagenet_weights;
  if (simsiam_bj_weights) j["simsiam_bj_weights"] = *simsiam_bj_weights;
  if (simsiam_dl_weights) j["simsiam_dl_weights"] = *simsiam_dl_weights;
  j["max_epochs"] = max_epochs;
  if (patience) j["patience"] = *patience;
  else j["patience"] = nullptr;
  j["batch_size"] = batch_size;
  j["pretrain_epochs"] = pretrain_epochs;
  j["pretrain_all_scenes"] = pretrain_all_scenes;
  j["bootstrap_b"] = bootstrap_b;
  return j.dump(2);
}

std::string ExperimentConfig::run_name() const {
  return aqop::to_string(family) + "_" + aqop::to_string(features) + "_" +
         aqop::to_string(target) + "_" + aqop::to_string(image_type) + "_seed" +
         std::to_string(seed);
}

std::uint32_t ExperimentConfig::hash() const {
  const std::string text = to_json();
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size())));
}

void ExperimentConfig::validate() const {
  if (data_root.empty()) throw Error("config: data_root is required");
  if (out_dir.empty()) throw Error("config: out_dir is required");
  if (family == Family::Baseline && features != FeatureSet::M) {
    throw Error("config: the baseline family uses feature set M only");
  }
  if (family != Family::Baseline && !uses_images(features)) {
    throw Error("config: family " + aqop::to_string(family) + " needs image features");
  }
  if (features == FeatureSet::IH &&
      !(family == Family::Transfer || family == Family::Finetune)) {
    throw Error("config: feature set I+H applies to the transfer and finetune families");
  }
  if ((family == Family::Transfer || family == Family::Finetune) && !imagenet_weights) {
    throw Error("config: family " + aqop::to_string(family) + " requires imagenet_weights");
  }
  if (family == Family::SimSiamBJ && !simsiam_bj_weights) {
    throw Error("config: family simsiam_bj requires simsiam_bj_weights");
  }
  if (family == Family::SimSiamDL && !simsiam_dl_weights) {
    throw Error("config: family simsiam_dl requires simsiam_dl_weights");
  }
  if (batch_size <= 0 || max_epochs <= 0 || pretrain_epochs <= 0 || bootstrap_b <= 0) {
    throw Error("config: batch_size, max_epochs, pretrain_epochs, bootstrap_b must be positive");
  }
  if (patience && *patience <= 0) throw Error("config: patience must be positive");
}

namespace {

struct Sample {
  const StationDayRecord* rec = nullptr;
  double y = 0;
};

struct Corpus {
  std::vector<StationDayRecord> records;
  SplitAssignment splits;
  std::map<std::string, int> reject_reasons;
  std::size_t scenes_total = 0;
  std::size_t scenes_clear = 0;
};

std::string scene_key(const std::string& station, const Date& d) { return station + "|" + d.str(); }

Corpus load_corpus(const std::string& data_root, ImageType image_type, std::uint64_t split_seed) {
  Corpus corpus;
  auto scenes = read_scene_manifest((fs::path(data_root) / "scenes.csv").string());
  auto filter = CloudFilterConfig::load((fs::path(data_root) / "cloud_filter.json").string());

  std::vector<SceneMeta> clear;
  for (const auto& s : scenes) {
    if (s.image_type != image_type) continue;
    ++corpus.scenes_total;
    std::string why;
    if (apply_cloud_filter(s, filter, &why)) {
      clear.push_back(s);
    } else {
      ++corpus.reject_reasons[why];
    }
  }
  clear = dedup_scenes(clear);
  corpus.scenes_clear = clear.size();

  auto met = read_met_csv((fs::path(data_root) / "met.csv").string());
  auto aq_rows = read_aq_csv((fs::path(data_root) / "aq.csv").string());
  for (auto& aq : aq_rows) aq = apply_outlier_filter(aq);

  corpus.records = build_records(clear, met, aq_rows);

  std::set<Date> dates;
  for (const auto& r : corpus.records) {
    if (r.scene) dates.insert(r.date);
  }
  if (dates.empty()) throw Error("prepare: no station-days with clear scenes");
  corpus.splits = assign_splits(dates, {0.6, 0.2, 0.2}, split_seed);
  return corpus;
}

// Met standardization over the supervised train samples; a constant
// variable maps to zero instead of dividing by zero.
struct MetStandardizer {
  std::array<double, MetVector::kDim> mean{};
  std::array<double, MetVector::kDim> std{};

  static MetStandardizer fit(const std::vector<Sample>& train) {
    if (train.empty()) throw Error("met standardization: empty train set");
    MetStandardizer s;
    for (const auto& smp : train) {
      const auto v = smp.rec->met.values();
      for (int k = 0; k < MetVector::kDim; ++k) s.mean[k] += v[k];
    }
    for (auto& m : s.mean) m /= static_cast<double>(train.size());
    for (const auto& smp : train) {
      const auto v = smp.rec->met.values();
      for (int k = 0; k < MetVector::kDim; ++k) {
        const double d = v[k] - s.mean[k];
        s.std[k] += d * d;
      }
    }
    for (auto& v : s.std) v = std::sqrt(v / static_cast<double>(train.size()));
    for (auto& v : s.std) {
      if (v == 0) v = 1;
    }
    return s;
  }

  std::array<double, MetVector::kDim> apply(const MetVector& m) const {
    auto v = m.values();
    for (int k = 0; k < MetVector::kDim; ++k) v[k] = (v[k] - mean[k]) / std[k];
    return v;
  }
};

torch::Tensor met_matrix(const std::vector<Sample>& samples, const MetStandardizer& std) {
  auto out = torch::empty({static_cast<std::int64_t>(samples.size()), MetVector::kDim},
                          torch::kFloat32);
  auto acc = out.accessor<float, 2>();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto v = std.apply(samples[i].rec->met);
    for (int k = 0; k < MetVector::kDim; ++k) acc[i][k] = static_cast<float>(v[k]);
  }
  return out;
}

torch::Tensor embedding_matrix(const std::vector<Sample>& samples, const MetForest& forest) {
  auto out = torch::zeros({static_cast<std::int64_t>(samples.size()), forest.dimension()},
                          torch::kFloat32);
  auto acc = out.accessor<float, 2>();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (int leaf : forest.embed_indices(samples[i].rec->met)) acc[i][leaf] = 1.0f;
  }
  return out;
}

torch::Tensor targets_tensor(const std::vector<Sample>& samples) {
  auto out = torch::empty({static_cast<std::int64_t>(samples.size())}, torch::kFloat32);
  auto acc = out.accessor<float, 1>();
  for (std::size_t i = 0; i < samples.size(); ++i) acc[i] = static_cast<float>(samples[i].y);
  return out;
}

// Frozen-path feature extraction: normalized bands through the backbone in
// evaluation mode, batched to bound memory.
torch::Tensor frozen_image_features(Backbone& backbone, const std::vector<Sample>& samples,
                                    const NormStats& stats, const std::string& data_root) {
  auto out = torch::empty({static_cast<std::int64_t>(samples.size()), kFeatureDim},
                          torch::kFloat32);
  const std::size_t batch = 16;
  for (std::size_t begin = 0; begin < samples.size(); begin += batch) {
    const std::size_t end = std::min(samples.size(), begin + batch);
    std::vector<torch::Tensor> bands;
    bands.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      auto scene = load_scene(*samples[i].rec->scene, data_root);
      bands.push_back(normalize_bands(scene.bands, stats));
    }
    auto feats = extract_features(backbone, torch::stack(bands));
    out.narrow(0, static_cast<std::int64_t>(begin), static_cast<std::int64_t>(end - begin))
        .copy_(feats);
  }
  return out;
}

TrainBatchSource matrix_source(const torch::Tensor& features, const torch::Tensor& targets) {
  TrainBatchSource src;
  src.targets = targets;
  src.size = static_cast<std::size_t>(features.size(0));
  src.make_inputs = [features](const std::vector<std::size_t>& idx, bool) {
    return features.index_select(
        0, torch::tensor(std::vector<std::int64_t>(idx.begin(), idx.end()), torch::kInt64));
  };
  return src;
}

// Fine-tuning path: the backbone forward runs inside make_inputs so its
// trainable stages stay in the autograd graph.
TrainBatchSource finetune_source(Backbone backbone, const std::vector<Sample>& samples,
                                 const NormStats& stats, const std::string& data_root,
                                 const std::optional<torch::Tensor>& met_part,
                                 const torch::Tensor& targets) {
  TrainBatchSource src;
  src.targets = targets;
  src.size = samples.size();
  std::vector<SceneMeta> metas;
  metas.reserve(samples.size());
  for (const auto& s : samples) metas.push_back(*s.rec->scene);
  src.make_inputs = [backbone, metas, stats, data_root, met_part](
                        const std::vector<std::size_t>& idx, bool train_mode) mutable {
    if (train_mode) {
      apply_training_mode(backbone);
    } else {
      backbone->eval();
    }
    std::vector<torch::Tensor> bands;
    bands.reserve(idx.size());
    for (auto i : idx) {
      auto scene = load_scene(metas[i], data_root);
      bands.push_back(normalize_bands(scene.bands, stats));
    }
    auto feats = backbone->forward(torch::stack(bands));
    if (!met_part) return feats;
    auto met = met_part->index_select(
        0, torch::tensor(std::vector<std::int64_t>(idx.begin(), idx.end()), torch::kInt64));
    return torch::cat({feats, met}, /*dim=*/-1);
  };
  return src;
}

std::vector<double> predict_all(Head& head, const TrainBatchSource& src) {
  torch::NoGradGuard no_grad;
  head->eval();
  std::vector<double> out;
  out.reserve(src.size);
  const std::size_t batch = 256;
  for (std::size_t begin = 0; begin < src.size; begin += batch) {
    const std::size_t end = std::min(src.size, begin + batch);
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    auto preds = head->forward(src.make_inputs(idx, /*train_mode=*/false)).contiguous();
    auto acc = preds.accessor<float, 1>();
    for (std::int64_t i = 0; i < preds.size(0); ++i) out.push_back(acc[i]);
  }
  return out;
}

}  // namespace

std::vector<std::pair<double, double>> pretrain_backbone(const ExperimentConfig& cfg,
                                                         const std::string& out_archive) {
  if (cfg.data_root.empty()) throw Error("pretrain: data_root is required");
  Corpus corpus = load_corpus(cfg.data_root, cfg.image_type, sub_seed(cfg.seed, "split"));

  std::vector<const SceneMeta*> metas;
  for (const auto& rec : corpus.records) {
    if (!rec.scene) continue;
    if (!cfg.pretrain_all_scenes && corpus.splits.at(rec.date) != Split::Train) continue;
    metas.push_back(&*rec.scene);
  }
  if (metas.size() < 2) throw Error("pretrain: fewer than two clear scenes");

  std::vector<ScenePatch> patches;
  patches.reserve(metas.size());
  std::vector<const ScenePatch*> ptrs;
  for (const auto* m : metas) {
    patches.push_back(load_scene(*m, cfg.data_root));
    ptrs.push_back(&patches.back());
  }
  // Statistics stay train-only even when pre-training uses all scenes.
  std::vector<const ScenePatch*> train_ptrs;
  for (std::size_t i = 0; i < metas.size(); ++i) {
    if (corpus.splits.at(metas[i]->date) == Split::Train) train_ptrs.push_back(ptrs[i]);
  }
  const NormStats norm = compute_norm_stats(train_ptrs.size() >= 2 ? train_ptrs : ptrs,
                                            cfg.image_type);
  patches.clear();

  auto backbone = build_backbone(
      BackboneSpec{InitMode::Random, channel_count(cfg.image_type), FreezePolicy::AllTrainable,
                   std::nullopt},
      sub_seed(cfg.seed, "init"));
  std::vector<std::function<torch::Tensor()>> loaders;
  loaders.reserve(metas.size());
  for (const auto* m : metas) {
    const SceneMeta meta = *m;
    const std::string root = cfg.data_root;
    loaders.push_back(
        [meta, norm, root]() { return normalize_bands(load_scene(meta, root).bands, norm); });
  }
  SimSiamSpec sspec;
  sspec.epochs = cfg.pretrain_epochs;
  auto history = train_simsiam(backbone, loaders, sspec, sub_seed(cfg.seed, "pretrain"));
  save_backbone(backbone, out_archive, "pretrained seed " + std::to_string(cfg.seed));

  std::vector<std::pair<double, double>> trace;
  for (std::size_t e = 0; e < history.epoch_loss.size(); ++e) {
    trace.push_back({history.epoch_loss[e], history.repr_std[e]});
  }
  return trace;
}

PrepareSummary prepare_corpus(const std::string& data_root, ImageType image_type,
                              std::uint64_t seed, const std::string& out_summary_json) {
  Corpus corpus = load_corpus(data_root, image_type, sub_seed(seed, "split"));
  PrepareSummary s;
  s.scenes_total = corpus.scenes_total;
  s.scenes_clear = corpus.scenes_clear;
  s.records = corpus.records.size();
  s.reject_reasons = corpus.reject_reasons;
  for (const auto& [date, split] : corpus.splits.by_date) {
    if (split == Split::Train) ++s.train_dates;
    else if (split == Split::Val) ++s.val_dates;
    else ++s.test_dates;
  }
  if (!out_summary_json.empty()) {
    json j;
    j["scenes_total"] = s.scenes_total;
    j["scenes_clear"] = s.scenes_clear;
    j["records"] = s.records;
    j["train_dates"] = s.train_dates;
    j["val_dates"] = s.val_dates;
    j["test_dates"] = s.test_dates;
    j["reject_reasons"] = s.reject_reasons;
    std::ofstream out(out_summary_json);
    if (!out) throw Error("prepare: cannot write " + out_summary_json);
    out << j.dump(2) << "\n";
  }
  return s;
}

std::vector<std::pair<Family, FeatureSet>> report_grid_rows() {
  return {
      {Family::Baseline, FeatureSet::M},   {Family::Random, FeatureSet::IM},
      {Family::Transfer, FeatureSet::IM},  {Family::Finetune, FeatureSet::IM},
      {Family::Transfer, FeatureSet::IH},  {Family::Finetune, FeatureSet::IH},
      {Family::SimSiam, FeatureSet::IM},   {Family::SimSiamBJ, FeatureSet::IM},
      {Family::SimSiamDL, FeatureSet::IM}, {Family::Random, FeatureSet::I},
      {Family::Transfer, FeatureSet::I},   {Family::Finetune, FeatureSet::I},
      {Family::SimSiam, FeatureSet::I},    {Family::SimSiamBJ, FeatureSet::I},
      {Family::SimSiamDL, FeatureSet::I},
  };
}

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path run_dir = fs::path(cfg.out_dir) / cfg.run_name();
  fs::remove_all(run_dir);
  fs::create_directories(run_dir);

  std::string stage = "prepare";
  try {
    // ---- prepare -------------------------------------------------------
    Corpus corpus = load_corpus(cfg.data_root, cfg.image_type, sub_seed(cfg.seed, "split"));

    // Supervised samples: station-days with a clear scene and an observed
    // target. The baseline uses the same station-days for comparability.
    std::map<Split, std::vector<Sample>> samples;
    for (const auto& rec : corpus.records) {
      if (!rec.scene || !rec.aq) continue;
      auto y = target_value(*rec.aq, cfg.target);
      if (!y) continue;
      samples[corpus.splits.at(rec.date)].push_back({&rec, *y});
    }
    for (auto& [split, vec] : samples) {
      std::sort(vec.begin(), vec.end(), [](const Sample& a, const Sample& b) {
        return std::tie(a.rec->station_id, a.rec->date) < std::tie(b.rec->station_id, b.rec->date);
      });
    }
    const auto& train = samples[Split::Train];
    const auto& val = samples[Split::Val];
    const auto& test = samples[Split::Test];
    if (train.empty() || val.empty() || test.empty()) {
      throw Error("no supervised samples in one of the splits for target " +
                  aqop::to_string(cfg.target));
    }

    const MetStandardizer met_std = MetStandardizer::fit(train);

    std::optional<MetForest> forest;
    if (uses_embedding(cfg.features)) {
      std::vector<MetVector> rows;
      rows.reserve(train.size());
      for (const auto& s : train) rows.push_back(s.rec->met);
      forest = MetForest::fit(rows, ForestSpec{256, 3, sub_seed(cfg.seed, "forest")});
    }

    // Image normalization statistics over every clear train-split scene.
    std::optional<NormStats> norm;
    std::vector<const SceneMeta*> train_scene_metas;
    if (uses_images(cfg.features)) {
      for (const auto& rec : corpus.records) {
        if (rec.scene && corpus.splits.at(rec.date) == Split::Train) {
          train_scene_metas.push_back(&*rec.scene);
        }
      }
      std::vector<ScenePatch> patches;
      patches.reserve(train_scene_metas.size());
      std::vector<const ScenePatch*> ptrs;
      for (const auto* meta : train_scene_metas) {
        patches.push_back(load_scene(*meta, cfg.data_root));
        ptrs.push_back(&patches.back());
      }
      norm = compute_norm_stats(ptrs, cfg.image_type);
    }

    // ---- pretrain ------------------------------------------------------
    stage = "pretrain";
    std::optional<Backbone> backbone;
    SimSiamHistory pretrain_history;
    const int channels = channel_count(cfg.image_type);
    if (cfg.family == Family::SimSiam) {
      backbone = build_backbone(
          BackboneSpec{InitMode::Random, channels, FreezePolicy::AllTrainable, std::nullopt},
          sub_seed(cfg.seed, "init"));
      std::vector<const SceneMeta*> pretrain_metas = train_scene_metas;
      if (cfg.pretrain_all_scenes) {
        pretrain_metas.clear();
        for (const auto& rec : corpus.records) {
          if (rec.scene) pretrain_metas.push_back(&*rec.scene);
        }
      }
      std::vector<std::function<torch::Tensor()>> loaders;
      loaders.reserve(pretrain_metas.size());
      for (const auto* meta : pretrain_metas) {
        const SceneMeta m = *meta;
        const NormStats stats = *norm;
        const std::string root = cfg.data_root;
        loaders.push_back(
            [m, stats, root]() { return normalize_bands(load_scene(m, root).bands, stats); });
      }
      SimSiamSpec sspec;
      sspec.epochs = cfg.pretrain_epochs;
      pretrain_history = train_simsiam(*backbone, loaders, sspec, sub_seed(cfg.seed, "pretrain"));
      save_backbone(*backbone, (run_dir / "pretrained_backbone.aqt").string(),
                    cfg.run_name() + " pretrained");
      set_freeze_policy(*backbone, FreezePolicy::AllFrozen);
    }

    // ---- backbone ------------------------------------------------------
    stage = "backbone";
    switch (cfg.family) {
      case Family::Baseline:
      case Family::SimSiam:
        break;
      case Family::Random:
        backbone = build_backbone(
            BackboneSpec{InitMode::Random, channels, FreezePolicy::AllFrozen, std::nullopt},
            sub_seed(cfg.seed, "init"));
        break;
      case Family::Transfer:
        backbone = build_backbone(BackboneSpec{InitMode::ImageNet, channels,
                                               FreezePolicy::AllFrozen, cfg.imagenet_weights},
                                  sub_seed(cfg.seed, "init"));
        break;
      case Family::Finetune:
        backbone = build_backbone(
            BackboneSpec{InitMode::ImageNet, channels, FreezePolicy::TuneBlock4Avgpool,
                         cfg.imagenet_weights},
            sub_seed(cfg.seed, "init"));
        break;
      case Family::SimSiamBJ:
        backbone = build_backbone(
            BackboneSpec{InitMode::ExternalFile, channels, FreezePolicy::TuneBlock4Avgpool,
                         cfg.simsiam_bj_weights},
            sub_seed(cfg.seed, "init"));
        break;
      case Family::SimSiamDL:
        backbone = build_backbone(
            BackboneSpec{InitMode::ExternalFile, channels, FreezePolicy::TuneBlock4Avgpool,
                         cfg.simsiam_dl_weights},
            sub_seed(cfg.seed, "init"));
        break;
    }
    const bool finetuned =
        backbone && (*backbone)->freeze_policy() == FreezePolicy::TuneBlock4Avgpool;

    // ---- features and training ------------------------------------------
    stage = "train";
    auto non_image_part = [&](const std::vector<Sample>& s) -> std::optional<torch::Tensor> {
      if (uses_met(cfg.features)) return met_matrix(s, met_std);
      if (uses_embedding(cfg.features)) return embedding_matrix(s, *forest);
      return std::nullopt;
    };

    int input_dim = 0;
    if (uses_images(cfg.features)) input_dim += kFeatureDim;
    if (uses_met(cfg.features)) input_dim += MetVector::kDim;
    if (uses_embedding(cfg.features)) input_dim += forest->dimension();

    auto make_source = [&](const std::vector<Sample>& s) -> TrainBatchSource {
      auto targets = targets_tensor(s);
      auto met_part = non_image_part(s);
      if (!uses_images(cfg.features)) {
        return matrix_source(*met_part, targets);
      }
      if (finetuned) {
        return finetune_source(*backbone, s, *norm, cfg.data_root, met_part, targets);
      }
      auto image = frozen_image_features(*backbone, s, *norm, cfg.data_root);
      auto fused = met_part ? torch::cat({image, *met_part}, -1) : image;
      return matrix_source(fused, targets);
    };

    auto train_src = make_source(train);
    auto val_src = make_source(val);
    auto test_src = make_source(test);

    Head head = build_head(HeadSpec{input_dim, 512, 0.2}, sub_seed(cfg.seed, "head"));
    TrainConfig tcfg;
    tcfg.batch_size = cfg.batch_size;
    tcfg.max_epochs = cfg.max_epochs;
    tcfg.early_stop_patience = cfg.family == Family::Baseline ? std::nullopt : cfg.patience;
    tcfg.seed = sub_seed(cfg.seed, "train");
    auto history = train_supervised(head, finetuned ? &*backbone : nullptr, train_src, val_src,
                                    tcfg);

    // ---- evaluate --------------------------------------------------------
    stage = "evaluate";
    RunArtifacts artifacts;
    artifacts.run_dir = run_dir.string();
    artifacts.config_hash = cfg.hash();
    artifacts.best_epoch = history.best_epoch;

    struct SplitEval {
      std::string name;
      const std::vector<Sample>* samples;
      const TrainBatchSource* src;
      std::vector<double> y, yhat;
    };
    std::vector<SplitEval> evals = {{"train", &train, &train_src, {}, {}},
                                    {"val", &val, &val_src, {}, {}},
                                    {"test", &test, &test_src, {}, {}}};
    for (auto& ev : evals) {
      ev.yhat = predict_all(head, *ev.src);
      for (const auto& s : *ev.samples) ev.y.push_back(s.y);
      auto report = compute_metrics(ev.y, ev.yhat);
      report.split = ev.name;
      report.target = aqop::to_string(cfg.target);
      report.model = display_model_name(cfg.family);
      artifacts.reports.push_back(report);
    }

    const auto& test_eval = evals[2];
    const std::uint64_t boot_seed = sub_seed(cfg.seed, "bootstrap");
    const auto r2_fn = [](const std::vector<double>& y, const std::vector<double>& yh) {
      return compute_metrics(y, yh).r2;
    };
    const auto rmse_fn = [](const std::vector<double>& y, const std::vector<double>& yh) {
      return compute_metrics(y, yh).rmse;
    };
    const auto nmae_fn = [](const std::vector<double>& y, const std::vector<double>& yh) {
      return compute_metrics(y, yh).nmae;
    };
    artifacts.cis.push_back(
        bootstrap_ci(test_eval.y, test_eval.yhat, "r2", r2_fn, cfg.bootstrap_b, boot_seed));
    artifacts.cis.push_back(
        bootstrap_ci(test_eval.y, test_eval.yhat, "rmse", rmse_fn, cfg.bootstrap_b, boot_seed));
    artifacts.cis.push_back(
        bootstrap_ci(test_eval.y, test_eval.yhat, "nmae", nmae_fn, cfg.bootstrap_b, boot_seed));

    std::map<std::string, std::vector<std::pair<double, double>>> per_station;
    for (std::size_t i = 0; i < test.size(); ++i) {
      per_station[test[i].rec->station_id].push_back({test_eval.y[i], test_eval.yhat[i]});
    }
    artifacts.station_skill = station_mean_skill(per_station);

    // ---- artifacts -------------------------------------------------------
    stage = "artifacts";
    const std::string hash_str = std::to_string(artifacts.config_hash);
    {
      json j = json::parse(cfg.to_json());
      j["config_hash"] = artifacts.config_hash;
      j["run_name"] = cfg.run_name();
      std::ofstream out(run_dir / "config.json");
      out << j.dump(2) << "\n";
    }
    {
      auto t = CsvTable::from_header({"model", "features", "target", "image_type", "seed",
                                      "split", "n", "r2", "rmse", "nmae", "station_skill",
                                      "config_hash"});
      for (const auto& r : artifacts.reports) {
        t.append_row({r.model, aqop::to_string(cfg.features), r.target,
                      aqop::to_string(cfg.image_type), std::to_string(cfg.seed), r.split,
                      std::to_string(r.n), format_double(r.r2), format_double(r.rmse),
                      format_double(r.nmae),
                      r.split == "test" ? format_double(artifacts.station_skill) : "",
                      hash_str});
      }
      t.write_file((run_dir / "metrics.csv").string());
    }
    {
      auto t = CsvTable::from_header({"metric", "point", "lower", "upper", "b", "seed",
                                      "config_hash"});
      for (const auto& ci : artifacts.cis) {
        t.append_row({ci.metric, format_double(ci.point), format_double(ci.lower),
                      format_double(ci.upper), std::to_string(ci.b), std::to_string(ci.seed),
                      hash_str});
      }
      t.write_file((run_dir / "bootstrap.csv").string());
    }
    {
      auto t = CsvTable::from_header(
          {"split", "station", "date", "observed", "estimated", "config_hash"});
      for (const auto& ev : evals) {
        for (std::size_t i = 0; i < ev.samples->size(); ++i) {
          t.append_row({ev.name, (*ev.samples)[i].rec->station_id,
                        (*ev.samples)[i].rec->date.str(), format_double(ev.y[i]),
                        format_double(ev.yhat[i]), hash_str});
        }
      }
      t.write_file((run_dir / "predictions.csv").string());
    }
    {
      auto t = CsvTable::from_header({"epoch", "train_loss", "val_loss", "config_hash"});
      for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        t.append_row({std::to_string(e + 1), format_double(history.train_loss[e]),
                      format_double(history.val_loss[e]), hash_str});
      }
      t.write_file((run_dir / "history.csv").string());
    }
    const std::string title_base =
        display_model_name(cfg.family) + " " + aqop::to_string(cfg.features) + " " +
        aqop::to_string(cfg.target) + " [" + hash_str + "]";
    for (const auto& ev : evals) {
      write_scatter_svg((run_dir / ("scatter_" + ev.name + ".svg")).string(), ev.y, ev.yhat,
                        title_base + " " + ev.name);
    }
    write_loss_curve_svg((run_dir / "loss_curve.svg").string(), history.train_loss,
                         history.val_loss, history.best_epoch, title_base);
    if (forest) forest->save((run_dir / "forest.json").string());
    {
      json summary;
      summary["run_name"] = cfg.run_name();
      summary["config_hash"] = artifacts.config_hash;
      summary["best_epoch"] = history.best_epoch;
      summary["stopped_epoch"] = history.stopped_epoch;
      summary["n_train"] = train.size();
      summary["n_val"] = val.size();
      summary["n_test"] = test.size();
      summary["station_skill"] = artifacts.station_skill;
      for (const auto& r : artifacts.reports) {
        summary["metrics"][r.split] = {{"r2", r.r2}, {"rmse", r.rmse}, {"nmae", r.nmae},
                                       {"n", r.n}};
      }
      if (cfg.family == Family::SimSiam) {
        summary["pretrain"] = {{"epochs", pretrain_history.epoch_loss.size()},
                               {"final_loss", pretrain_history.epoch_loss.empty()
                                                  ? 0.0
                                                  : pretrain_history.epoch_loss.back()},
                               {"final_repr_std", pretrain_history.repr_std.empty()
                                                      ? 0.0
                                                      : pretrain_history.repr_std.back()}};
      }
      std::ofstream out(run_dir / "summary.json");
      out << summary.dump(2) << "\n";
    }
    {
      TensorArchive arc;
      arc.put_module("head", *head);
      if (backbone && backbone_is_trained_here(cfg.family)) {
        arc.put_module("backbone", **backbone);
      }
      if (norm) {
        arc.put("norm.mean", torch::tensor(norm->mean, torch::kFloat64));
        arc.put("norm.std", torch::tensor(norm->std, torch::kFloat64));
      }
      arc.put("met.mean", torch::tensor(std::vector<double>(met_std.mean.begin(),
                                                            met_std.mean.end()),
                                        torch::kFloat64));
      arc.put("met.std", torch::tensor(std::vector<double>(met_std.std.begin(),
                                                           met_std.std.end()),
                                       torch::kFloat64));
      arc.meta()["config"] = json::parse(cfg.to_json());
      arc.meta()["config_hash"] = artifacts.config_hash;
      arc.meta()["input_dim"] = input_dim;
      arc.save((run_dir / "checkpoint.aqt").string());
      artifacts.checkpoint_path = (run_dir / "checkpoint.aqt").string();
    }
    return artifacts;
  } catch (const std::exception& e) {
    fs::remove_all(run_dir);
    throw Error("stage " + stage + ": " + e.what());
  }
}

namespace {

struct ReportCell {
  double r2 = 0, rmse = 0, nmae = 0;
  bool present = false;
};

}  // namespace

void emit_report(const std::vector<std::string>& run_dirs, const std::string& out_csv) {
  // (model display name, features) x target -> test metrics.
  std::map<std::pair<std::string, std::string>, std::map<std::string, ReportCell>> cells;
  for (const auto& dir : run_dirs) {
    const auto path = (fs::path(dir) / "metrics.csv").string();
    auto t = CsvTable::read_file(path);
    for (std::size_t i = 0; i < t.num_rows(); ++i) {
      if (t.cell(i, "split") != "test") continue;
      ReportCell cell;
      cell.r2 = *t.cell_double(i, "r2");
      cell.rmse = *t.cell_double(i, "rmse");
      cell.nmae = *t.cell_double(i, "nmae");
      cell.present = true;
      cells[{t.cell(i, "model"), t.cell(i, "features")}][t.cell(i, "target")] = cell;
    }
  }

  const std::vector<std::string> targets = {"op_aa", "op_dtt", "pm10"};
  std::vector<std::string> header = {"model", "features"};
  for (const auto& tg : targets) {
    header.push_back(tg + "_r2");
    header.push_back(tg + "_rmse");
    header.push_back(tg + "_nmae");
  }
  auto out = CsvTable::from_header(header);
  for (const auto& [family, features] : report_grid_rows()) {
    const auto key = std::make_pair(display_model_name(family), to_string(features));
    auto it = cells.find(key);
    if (it == cells.end()) continue;
    std::vector<std::string> row = {key.first, key.second};
    for (const auto& tg : targets) {
      auto nested = it->second.find(tg);
      if (nested == it->second.end() || !nested->second.present) {
        row.insert(row.end(), {"", "", ""});
      } else {
        row.push_back(format_double(nested->second.r2, 4));
        row.push_back(format_double(nested->second.rmse, 4));
        row.push_back(format_double(nested->second.nmae, 4));
      }
    }
    out.append_row(std::move(row));
  }
  out.write_file(out_csv);
}

void emit_report_from_tree(const std::string& runs_root, const std::string& out_csv) {
  std::vector<std::string> run_dirs;
  if (!fs::exists(runs_root)) throw Error("report: no such directory: " + runs_root);
  for (const auto& entry : fs::recursive_directory_iterator(runs_root)) {
    if (entry.is_regular_file() && entry.path().filename() == "metrics.csv") {
      run_dirs.push_back(entry.path().parent_path().string());
    }
  }
  std::sort(run_dirs.begin(), run_dirs.end());
  if (run_dirs.empty()) throw Error("report: no runs found under " + runs_root);
  emit_report(run_dirs, out_csv);
}

}  // namespace aqop
