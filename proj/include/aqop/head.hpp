// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "aqop/backbone.hpp"
#include "aqop/types.hpp"

namespace aqop {

struct HeadSpec {
  int input_dim = 2054;
  int hidden_dim = 512;
  double dropout = 0.2;
};

// 3-layer regression MLP: input -> 512 (ReLU, dropout) -> 512 (ReLU,
// dropout) -> 1.
struct HeadImpl : torch::nn::Module {
  explicit HeadImpl(const HeadSpec& spec);
  torch::Tensor forward(torch::Tensor x);  // NxD -> N

  HeadSpec spec;
  torch::nn::Linear fc1{nullptr}, fc2{nullptr}, fc3{nullptr};
  torch::nn::Dropout drop1{nullptr}, drop2{nullptr};
};
TORCH_MODULE(Head);

Head build_head(const HeadSpec& spec, std::uint64_t seed);

// Single evaluation-mode prediction; throws on feature length mismatch.
double predict(Head& head, const std::vector<double>& features);

// Concatenation in fixed order [image || met-or-embedding]. At least one
// part must be present; met and met_embedding are mutually exclusive.
torch::Tensor fuse_features(const std::optional<torch::Tensor>& image_feats,
                            const std::optional<torch::Tensor>& met,
                            const std::optional<torch::Tensor>& met_embedding);

struct TrainConfig {
  int batch_size = 32;          // drop_last is always on
  double learning_rate = 0.0005;
  int max_epochs = 150;
  std::optional<int> early_stop_patience = 25;  // nullopt: run all epochs (baseline)
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;
  int best_epoch = 0;     // argmin validation loss, 1-based
  int stopped_epoch = 0;  // number of epochs actually run (1-based last epoch)
};

// One supervised sample: fused non-image features and/or an image to be
// passed through the backbone, plus the regression target.
struct TrainBatchSource {
  // Returns the model input for the given sample indices. For head-only
  // and frozen-backbone models this is a feature matrix; for fine-tuning it
  // runs the trainable backbone inside the autograd graph.
  std::function<torch::Tensor(const std::vector<std::size_t>&, bool train_mode)> make_inputs;
  torch::Tensor targets;  // N (float32)
  std::size_t size = 0;
};

// Minimizes MSE with Adam at a fixed learning rate; shuffles per epoch by
// seed; drops the final short batch; early-stops on validation loss with
// the given patience and restores best-validation weights.
TrainHistory train_supervised(Head& head, Backbone* trainable_backbone,
                              const TrainBatchSource& train, const TrainBatchSource& val,
                              const TrainConfig& config);

double mse_loss_over(const TrainBatchSource& data, Head& head, int batch_cap = 256);

}  // namespace aqop
