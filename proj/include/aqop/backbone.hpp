// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>

#include <torch/torch.h>

#include "aqop/types.hpp"

namespace aqop {

enum class InitMode { Random, ImageNet, SimSiamLocal, ExternalFile };
InitMode parse_init_mode(const std::string& s);
std::string to_string(InitMode m);

enum class FreezePolicy { AllFrozen, TuneBlock4Avgpool, AllTrainable };
FreezePolicy parse_freeze_policy(const std::string& s);
std::string to_string(FreezePolicy p);

struct BackboneSpec {
  InitMode init_mode = InitMode::Random;
  int in_channels = 3;
  FreezePolicy freeze_policy = FreezePolicy::AllFrozen;
  std::optional<std::string> external_weights_path;  // required for non-random modes
};

// ResNet50 bottleneck residual block.
struct BottleneckImpl : torch::nn::Module {
  BottleneckImpl(int in_planes, int planes, int stride, bool downsample);
  torch::Tensor forward(torch::Tensor x);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, bn3{nullptr};
  torch::nn::Sequential shortcut{nullptr};
};
TORCH_MODULE(Bottleneck);

// ResNet50 feature extractor: Conv1 .. Block4, global average pool, no
// classification layer. Output is a 2048-dimensional feature vector.
struct BackboneImpl : torch::nn::Module {
  explicit BackboneImpl(int in_channels);

  torch::Tensor forward(torch::Tensor x);  // NxCxHxW -> Nx2048

  int in_channels() const { return in_channels_; }
  FreezePolicy freeze_policy() const { return freeze_policy_; }

  torch::nn::Conv2d conv1{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr};
  torch::nn::Sequential layer1{nullptr}, layer2{nullptr}, layer3{nullptr}, layer4{nullptr};

  int in_channels_ = 3;
  FreezePolicy freeze_policy_ = FreezePolicy::AllTrainable;
};
TORCH_MODULE(Backbone);

// Builds a backbone per spec. Random mode is deterministic given seed;
// file-backed modes load atomically from the tensor-archive format and
// report the offending tensor on mismatch.
Backbone build_backbone(const BackboneSpec& spec, std::uint64_t seed);

// Widens Conv1 from 3 to 4 input channels. Original three channel slices
// are preserved bit-identically; the added slice is random-initialized from
// seed. Throws if the backbone is already 4-channel.
void adapt_input_channels(Backbone& backbone, int new_in, std::uint64_t seed);

// Marks parameters trainable per policy and puts batch-statistics layers in
// the matching mode: a frozen stage always runs with stored running stats.
void set_freeze_policy(Backbone& backbone, FreezePolicy policy);

// Puts module train()/eval() flags in the state train_supervised expects:
// frozen stages eval, trainable stages train.
void apply_training_mode(Backbone& backbone);

// Evaluation-mode feature extraction; deterministic in (weights, input).
torch::Tensor extract_features(Backbone& backbone, const torch::Tensor& normalized_bands);

void save_backbone(const Backbone& backbone, const std::string& path,
                   const std::string& tag = "");
Backbone load_backbone_archive(const std::string& path, int expect_channels);

}  // namespace aqop
