// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include <torch/torch.h>

#include "aqop/backbone.hpp"
#include "aqop/rng.hpp"
#include "aqop/types.hpp"

namespace aqop {

struct SimSiamSpec {
  double crop_scale_min = 0.2;  // fraction of image area
  double crop_scale_max = 1.0;
  int view_size = 96;
  double hflip_p = 0.5;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  double lr_max = 0.005;  // cosine-annealed to 0
  int epochs = 100;
  int batch_size = 32;
  // Reference design scaled to this backbone; fixed constants of the repo.
  int projector_dim = 2048;
  int predictor_hidden = 512;
};

// Cosine-annealed learning rate: lr(e) = lr_max * (1 + cos(pi*e/epochs)) / 2.
double simsiam_lr(const SimSiamSpec& spec, int epoch);

// One augmented view: square crop covering a uniform fraction of area in
// [crop_scale_min, crop_scale_max] at a uniform location, bilinearly resized
// to view_size, horizontally flipped with probability hflip_p. No colour or
// blur augmentation; pixel values are only resampled.
torch::Tensor augment_view(const torch::Tensor& bands, const SimSiamSpec& spec, Rng& rng);

// Symmetric negative cosine loss with stop-gradient on the z inputs:
// L = -1/2 * [cos(p1, sg(z2)) + cos(p2, sg(z1))]. Throws on zero-norm input.
torch::Tensor simsiam_loss(const torch::Tensor& p1, const torch::Tensor& z1,
                           const torch::Tensor& p2, const torch::Tensor& z2);

// Projector: 3 linear layers 2048->2048 with batch norm, final layer without
// ReLU. Predictor: bottleneck 2048->512->2048.
struct SimSiamHeadsImpl : torch::nn::Module {
  explicit SimSiamHeadsImpl(const SimSiamSpec& spec);
  torch::Tensor project(torch::Tensor features);
  torch::Tensor predict_repr(torch::Tensor z);
  torch::nn::Sequential projector{nullptr};
  torch::nn::Sequential predictor{nullptr};
};
TORCH_MODULE(SimSiamHeads);

struct SimSiamHistory {
  std::vector<double> epoch_loss;
  std::vector<double> repr_std;  // collapse monitor: std of L2-normalized z
};

// Trains backbone + projector + predictor end to end on unlabeled scenes
// and returns with the projector/predictor discarded (the backbone argument
// is trained in place). `load_scene_bands` yields normalized CxHxW tensors.
SimSiamHistory train_simsiam(Backbone& backbone,
                             const std::vector<std::function<torch::Tensor()>>& load_scene_bands,
                             const SimSiamSpec& spec, std::uint64_t seed);

}  // namespace aqop
