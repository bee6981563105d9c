// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/backbone.hpp"

#include "aqop/tensor_archive.hpp"

namespace aqop {

InitMode parse_init_mode(const std::string& s) {
  if (s == "random") return InitMode::Random;
  if (s == "imagenet") return InitMode::ImageNet;
  if (s == "simsiam_local") return InitMode::SimSiamLocal;
  if (s == "external_file") return InitMode::ExternalFile;
  throw Error("unknown init mode: '" + s + "'");
}

std::string to_string(InitMode m) {
  switch (m) {
    case InitMode::Random: return "random";
    case InitMode::ImageNet: return "imagenet";
    case InitMode::SimSiamLocal: return "simsiam_local";
    case InitMode::ExternalFile: return "external_file";
  }
  return "?";
}

FreezePolicy parse_freeze_policy(const std::string& s) {
  if (s == "all_frozen") return FreezePolicy::AllFrozen;
  if (s == "tune_block4_avgpool") return FreezePolicy::TuneBlock4Avgpool;
  if (s == "all_trainable") return FreezePolicy::AllTrainable;
  throw Error("unknown freeze policy: '" + s + "'");
}

std::string to_string(FreezePolicy p) {
  switch (p) {
    case FreezePolicy::AllFrozen: return "all_frozen";
    case FreezePolicy::TuneBlock4Avgpool: return "tune_block4_avgpool";
    case FreezePolicy::AllTrainable: return "all_trainable";
  }
  return "?";
}

BottleneckImpl::BottleneckImpl(int in_planes, int planes, int stride, bool downsample) {
  conv1 = register_module(
      "conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_planes, planes, 1).bias(false)));
  bn1 = register_module("bn1", torch::nn::BatchNorm2d(planes));
  conv2 = register_module(
      "conv2", torch::nn::Conv2d(
                   torch::nn::Conv2dOptions(planes, planes, 3).stride(stride).padding(1).bias(
                       false)));
  bn2 = register_module("bn2", torch::nn::BatchNorm2d(planes));
  conv3 = register_module(
      "conv3", torch::nn::Conv2d(torch::nn::Conv2dOptions(planes, planes * 4, 1).bias(false)));
  bn3 = register_module("bn3", torch::nn::BatchNorm2d(planes * 4));
  if (downsample) {
    shortcut = register_module(
        "shortcut",
        torch::nn::Sequential(
            torch::nn::Conv2d(
                torch::nn::Conv2dOptions(in_planes, planes * 4, 1).stride(stride).bias(false)),
            torch::nn::BatchNorm2d(planes * 4)));
  }
}

torch::Tensor BottleneckImpl::forward(torch::Tensor x) {
  auto identity = shortcut ? shortcut->forward(x) : x;
  x = torch::relu(bn1(conv1(x)));
  x = torch::relu(bn2(conv2(x)));
  x = bn3(conv3(x));
  return torch::relu(x + identity);
}

namespace {

torch::nn::Sequential make_stage(int in_planes, int planes, int blocks, int stride) {
  torch::nn::Sequential stage;
  stage->push_back(Bottleneck(in_planes, planes, stride, /*downsample=*/true));
  for (int i = 1; i < blocks; ++i) {
    stage->push_back(Bottleneck(planes * 4, planes, 1, /*downsample=*/false));
  }
  return stage;
}

// Kaiming-normal (fan_out) for convolutions; unit weight / zero bias for
// batch norm. One fixed scheme for "random weights".
void init_weights(torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& m : module.modules(/*include_self=*/true)) {
    if (auto* conv = m->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanOut, torch::kReLU);
    } else if (auto* bn = m->as<torch::nn::BatchNorm2d>()) {
      torch::nn::init::ones_(bn->weight);
      torch::nn::init::zeros_(bn->bias);
    }
  }
}

}  // namespace

BackboneImpl::BackboneImpl(int in_channels) : in_channels_(in_channels) {
  if (in_channels != 3 && in_channels != 4) throw Error("backbone: in_channels must be 3 or 4");
  conv1 = register_module(
      "conv1", torch::nn::Conv2d(
                   torch::nn::Conv2dOptions(in_channels, 64, 7).stride(2).padding(3).bias(false)));
  bn1 = register_module("bn1", torch::nn::BatchNorm2d(64));
  layer1 = register_module("layer1", make_stage(64, 64, 3, 1));
  layer2 = register_module("layer2", make_stage(256, 128, 4, 2));
  layer3 = register_module("layer3", make_stage(512, 256, 6, 2));
  layer4 = register_module("layer4", make_stage(1024, 512, 3, 2));
}

torch::Tensor BackboneImpl::forward(torch::Tensor x) {
  if (x.size(1) != in_channels_) {
    throw Error("backbone: input has " + std::to_string(x.size(1)) + " channels, expected " +
                std::to_string(in_channels_));
  }
  x = torch::relu(bn1(conv1(x)));
  x = torch::max_pool2d(x, 3, 2, 1);
  x = layer1->forward(x);
  x = layer2->forward(x);
  x = layer3->forward(x);
  x = layer4->forward(x);
  x = torch::adaptive_avg_pool2d(x, {1, 1});
  return x.flatten(1);
}

Backbone build_backbone(const BackboneSpec& spec, std::uint64_t seed) {
  const bool file_backed = spec.init_mode != InitMode::Random;
  if (file_backed && !spec.external_weights_path) {
    throw Error("backbone init mode '" + to_string(spec.init_mode) + "' requires a weights path");
  }

  torch::manual_seed(seed);
  Backbone backbone(file_backed ? 3 : spec.in_channels);
  init_weights(*backbone);

  if (file_backed) {
    TensorArchive archive = TensorArchive::load(*spec.external_weights_path);
    // Archives may carry 3- or 4-channel first convolutions; when the
    // archive is 3-channel and TOAR input is requested, widen after loading.
    const auto conv1_key = archive.contains("backbone.conv1.weight") ? "backbone.conv1.weight"
                                                                     : "conv1.weight";
    const std::string prefix = archive.contains("backbone.conv1.weight") ? "backbone" : "";
    const auto archive_channels = archive.get(conv1_key).size(1);
    if (archive_channels == 4) {
      backbone = Backbone(4);
    } else if (archive_channels != 3) {
      throw Error("weight archive conv1 has unsupported channel count");
    }
    archive.load_into_module(prefix, *backbone);
    if (spec.in_channels == 4 && backbone->in_channels() == 3) {
      adapt_input_channels(backbone, 4, seed);
    } else if (spec.in_channels != backbone->in_channels()) {
      throw Error("weight archive channel count does not match requested in_channels");
    }
  }

  set_freeze_policy(backbone, spec.freeze_policy);
  return backbone;
}

void adapt_input_channels(Backbone& backbone, int new_in, std::uint64_t seed) {
  if (new_in != 4) throw Error("adapt_input_channels: only 3->4 adaptation is supported");
  if (backbone->in_channels() != 3) throw Error("adapt_input_channels: backbone is not 3-channel");

  auto old_weight = backbone->conv1->weight.detach().clone();

  torch::manual_seed(seed);
  auto new_conv = torch::nn::Conv2d(
      torch::nn::Conv2dOptions(4, 64, 7).stride(2).padding(3).bias(false));
  torch::nn::init::kaiming_normal_(new_conv->weight, 0.0, torch::kFanOut, torch::kReLU);
  {
    torch::NoGradGuard no_grad;
    new_conv->weight.slice(1, 0, 3).copy_(old_weight);  // keep original values
  }
  backbone->conv1 = backbone->replace_module("conv1", new_conv);
  backbone->in_channels_ = 4;
  set_freeze_policy(backbone, backbone->freeze_policy());
}

void set_freeze_policy(Backbone& backbone, FreezePolicy policy) {
  backbone->freeze_policy_ = policy;
  auto set_stage = [](std::initializer_list<torch::nn::Module*> mods, bool trainable) {
    for (auto* m : mods) {
      for (auto& p : m->parameters(true)) p.set_requires_grad(trainable);
    }
  };
  const bool early = policy == FreezePolicy::AllTrainable;
  const bool block4 = policy != FreezePolicy::AllFrozen;
  set_stage({backbone->conv1.get(), backbone->bn1.get(), backbone->layer1.get(),
             backbone->layer2.get(), backbone->layer3.get()},
            early);
  set_stage({backbone->layer4.get()}, block4);
  apply_training_mode(backbone);
}

void apply_training_mode(Backbone& backbone) {
  const auto policy = backbone->freeze_policy();
  // Frozen stages keep their stored batch statistics; trainable stages
  // update them during supervised or contrastive training.
  const bool early_train = policy == FreezePolicy::AllTrainable;
  const bool block4_train = policy != FreezePolicy::AllFrozen;
  backbone->conv1->train(early_train);
  backbone->bn1->train(early_train);
  backbone->layer1->train(early_train);
  backbone->layer2->train(early_train);
  backbone->layer3->train(early_train);
  backbone->layer4->train(block4_train);
}

torch::Tensor extract_features(Backbone& backbone, const torch::Tensor& normalized_bands) {
  torch::NoGradGuard no_grad;
  backbone->eval();
  auto x = normalized_bands.dim() == 3 ? normalized_bands.unsqueeze(0) : normalized_bands;
  auto features = backbone->forward(x);
  if (features.size(1) != kFeatureDim) throw Error("backbone produced wrong feature dimension");
  return features;
}

void save_backbone(const Backbone& backbone, const std::string& path, const std::string& tag) {
  TensorArchive archive;
  archive.put_module("backbone", *backbone);
  archive.meta()["kind"] = "backbone";
  archive.meta()["in_channels"] = backbone->in_channels();
  if (!tag.empty()) archive.meta()["tag"] = tag;
  archive.save(path);
}

Backbone load_backbone_archive(const std::string& path, int expect_channels) {
  BackboneSpec spec;
  spec.init_mode = InitMode::ExternalFile;
  spec.in_channels = expect_channels;
  spec.external_weights_path = path;
  return build_backbone(spec, /*seed=*/0);
}

}  // namespace aqop
