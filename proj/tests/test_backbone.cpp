// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>

#include "aqop_doctest.h"

#include "aqop/backbone.hpp"
#include "aqop/tensor_archive.hpp"
#include "aqop/types.hpp"

namespace fs = std::filesystem;
using aqop::Backbone;
using aqop::BackboneSpec;
using aqop::FreezePolicy;
using aqop::InitMode;

namespace {

Backbone random_backbone(int channels, std::uint64_t seed,
                         FreezePolicy policy = FreezePolicy::AllFrozen) {
  return aqop::build_backbone(BackboneSpec{InitMode::Random, channels, policy, std::nullopt},
                              seed);
}

}  // namespace

TEST_CASE("backbone maps any spatial size to a 2048 feature vector") {
  auto b = random_backbone(3, 1);
  auto f = aqop::extract_features(b, torch::rand({2, 3, 96, 96}));
  CHECK(f.sizes() == torch::IntArrayRef({2, aqop::kFeatureDim}));
  // 3D input is treated as a single scene.
  auto single = aqop::extract_features(b, torch::rand({3, 64, 64}));
  CHECK(single.sizes() == torch::IntArrayRef({1, aqop::kFeatureDim}));
  CHECK_THROWS_AS(aqop::extract_features(b, torch::rand({2, 4, 64, 64})), aqop::Error);
}

TEST_CASE("random initialization is deterministic in the seed") {
  auto a = random_backbone(3, 7);
  auto b = random_backbone(3, 7);
  auto c = random_backbone(3, 8);
  const auto x = torch::rand({1, 3, 64, 64});
  CHECK(torch::equal(aqop::extract_features(a, x), aqop::extract_features(b, x)));
  CHECK_FALSE(torch::equal(aqop::extract_features(a, x), aqop::extract_features(c, x)));
}

TEST_CASE("freeze policies set requires_grad per stage") {
  auto frozen = random_backbone(3, 1, FreezePolicy::AllFrozen);
  for (const auto& p : frozen->parameters()) CHECK_FALSE(p.requires_grad());

  auto tuned = random_backbone(3, 1, FreezePolicy::TuneBlock4Avgpool);
  for (const auto& p : tuned->layer4->parameters()) CHECK(p.requires_grad());
  for (const auto& p : tuned->layer1->parameters()) CHECK_FALSE(p.requires_grad());
  for (const auto& p : tuned->layer2->parameters()) CHECK_FALSE(p.requires_grad());
  for (const auto& p : tuned->layer3->parameters()) CHECK_FALSE(p.requires_grad());
  CHECK_FALSE(tuned->conv1->weight.requires_grad());

  auto open = random_backbone(3, 1, FreezePolicy::AllTrainable);
  for (const auto& p : open->parameters()) CHECK(p.requires_grad());
}

TEST_CASE("channel adaptation preserves the original slices bit for bit") {
  auto b = random_backbone(3, 3);
  const auto before = b->conv1->weight.clone();
  aqop::adapt_input_channels(b, 4, 99);
  CHECK(b->in_channels() == 4);
  CHECK(b->conv1->weight.size(1) == 4);
  CHECK(torch::equal(b->conv1->weight.slice(1, 0, 3), before));
  auto f = aqop::extract_features(b, torch::rand({1, 4, 64, 64}));
  CHECK(f.size(1) == aqop::kFeatureDim);
  CHECK_THROWS_AS(aqop::adapt_input_channels(b, 4, 99), aqop::Error);
}

TEST_CASE("backbone archive round trip") {
  const auto path = (fs::temp_directory_path() / "aqop_bb.aqt").string();
  auto b = random_backbone(3, 11);
  aqop::save_backbone(b, path, "unit");
  auto loaded = aqop::load_backbone_archive(path, 3);
  const auto x = torch::rand({1, 3, 64, 64});
  CHECK(torch::equal(aqop::extract_features(b, x), aqop::extract_features(loaded, x)));

  SUBCASE("a 3-channel archive widens on request") {
    auto wide = aqop::load_backbone_archive(path, 4);
    CHECK(wide->in_channels() == 4);
    CHECK(torch::equal(wide->conv1->weight.slice(1, 0, 3), b->conv1->weight));
  }
  fs::remove(path);
}

TEST_CASE("file-backed modes demand a path and a valid file") {
  CHECK_THROWS_AS(
      aqop::build_backbone(BackboneSpec{InitMode::ImageNet, 3, FreezePolicy::AllFrozen,
                                        std::nullopt},
                           0),
      aqop::Error);
  CHECK_THROWS_AS(aqop::load_backbone_archive("/nonexistent/weights.aqt", 3), aqop::Error);
}

TEST_CASE("shape mismatch in external weights names the tensor") {
  const auto path = (fs::temp_directory_path() / "aqop_bb_bad.aqt").string();
  auto b = random_backbone(3, 2);
  aqop::TensorArchive arc;
  arc.put_module("backbone", *b);
  arc.put("backbone.conv1.weight", torch::rand({64, 3, 3, 3}));  // should be 7x7
  arc.save(path);
  CHECK_THROWS_WITH_AS(aqop::load_backbone_archive(path, 3),
                       doctest::Contains("conv1.weight"), aqop::Error);
  fs::remove(path);
}

TEST_CASE("training-mode flags follow the freeze policy") {
  auto tuned = random_backbone(3, 1, FreezePolicy::TuneBlock4Avgpool);
  aqop::apply_training_mode(tuned);
  CHECK(tuned->layer4->is_training());
  CHECK_FALSE(tuned->layer1->is_training());
  CHECK_FALSE(tuned->bn1->is_training());

  auto frozen = random_backbone(3, 1, FreezePolicy::AllFrozen);
  aqop::apply_training_mode(frozen);
  CHECK_FALSE(frozen->layer4->is_training());
}
