// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/head.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "aqop/rng.hpp"

namespace aqop {

HeadImpl::HeadImpl(const HeadSpec& s) : spec(s) {
  if (s.input_dim <= 0 || s.hidden_dim <= 0) throw Error("head: dimensions must be positive");
  fc1 = register_module("fc1", torch::nn::Linear(s.input_dim, s.hidden_dim));
  drop1 = register_module("drop1", torch::nn::Dropout(s.dropout));
  fc2 = register_module("fc2", torch::nn::Linear(s.hidden_dim, s.hidden_dim));
  drop2 = register_module("drop2", torch::nn::Dropout(s.dropout));
  fc3 = register_module("fc3", torch::nn::Linear(s.hidden_dim, 1));
}

torch::Tensor HeadImpl::forward(torch::Tensor x) {
  if (x.size(-1) != spec.input_dim) {
    throw Error("head: input has dimension " + std::to_string(x.size(-1)) + ", expected " +
                std::to_string(spec.input_dim));
  }
  x = drop1(torch::relu(fc1(x)));
  x = drop2(torch::relu(fc2(x)));
  return fc3(x).squeeze(-1);
}

Head build_head(const HeadSpec& spec, std::uint64_t seed) {
  torch::manual_seed(seed);
  return Head(spec);
}

double predict(Head& head, const std::vector<double>& features) {
  if (static_cast<int>(features.size()) != head->spec.input_dim) {
    throw Error("predict: feature length mismatch");
  }
  torch::NoGradGuard no_grad;
  head->eval();
  auto x = torch::tensor(std::vector<float>(features.begin(), features.end()), torch::kFloat32)
               .unsqueeze(0);
  return head->forward(x).item<double>();
}

torch::Tensor fuse_features(const std::optional<torch::Tensor>& image_feats,
                            const std::optional<torch::Tensor>& met,
                            const std::optional<torch::Tensor>& met_embedding) {
  if (met && met_embedding) throw Error("fuse_features: met and met_embedding are exclusive");
  std::vector<torch::Tensor> parts;
  if (image_feats) parts.push_back(*image_feats);
  if (met) parts.push_back(*met);
  if (met_embedding) parts.push_back(*met_embedding);
  if (parts.empty()) throw Error("fuse_features: at least one input required");
  if (parts.size() == 1) return parts[0];
  return torch::cat(parts, /*dim=*/-1);
}

namespace {

std::vector<torch::Tensor> trainable_parameters(Head& head, Backbone* backbone) {
  std::vector<torch::Tensor> params;
  for (auto& p : head->parameters()) params.push_back(p);
  if (backbone) {
    for (auto& p : (*backbone)->parameters()) {
      if (p.requires_grad()) params.push_back(p);
    }
  }
  return params;
}

std::vector<torch::Tensor> clone_all(const std::vector<torch::Tensor>& params) {
  std::vector<torch::Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.detach().clone());
  return out;
}

void restore_all(std::vector<torch::Tensor>& params, const std::vector<torch::Tensor>& saved) {
  torch::NoGradGuard no_grad;
  for (std::size_t i = 0; i < params.size(); ++i) params[i].copy_(saved[i]);
}

}  // namespace

double mse_loss_over(const TrainBatchSource& data, Head& head, int batch_cap) {
  torch::NoGradGuard no_grad;
  head->eval();
  double sq_sum = 0;
  std::size_t n = 0;
  for (std::size_t begin = 0; begin < data.size; begin += static_cast<std::size_t>(batch_cap)) {
    const auto end = std::min(data.size, begin + static_cast<std::size_t>(batch_cap));
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    auto inputs = data.make_inputs(idx, /*train_mode=*/false);
    auto preds = head->forward(inputs);
    auto targets = data.targets.index_select(
        0, torch::tensor(std::vector<std::int64_t>(idx.begin(), idx.end()), torch::kInt64));
    sq_sum += (preds - targets).pow(2).sum().item<double>();
    n += idx.size();
  }
  return sq_sum / static_cast<double>(n);
}

TrainHistory train_supervised(Head& head, Backbone* trainable_backbone,
                              const TrainBatchSource& train, const TrainBatchSource& val,
                              const TrainConfig& cfg) {
  if (train.size == 0 || val.size == 0) throw Error("train_supervised: empty train or val set");
  if (train.size < static_cast<std::size_t>(cfg.batch_size)) {
    throw Error("train_supervised: train set smaller than one batch (drop_last leaves no data)");
  }

  torch::manual_seed(cfg.seed);
  auto params = trainable_parameters(head, trainable_backbone);
  torch::optim::Adam optimizer(params, torch::optim::AdamOptions(cfg.learning_rate));

  Rng shuffle_rng = Rng(cfg.seed).derive("epoch-shuffle");
  const auto steps_per_epoch = train.size / static_cast<std::size_t>(cfg.batch_size);

  TrainHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<torch::Tensor> best_weights = clone_all(params);

  std::vector<std::size_t> order(train.size);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    head->train();
    if (trainable_backbone) apply_training_mode(*trainable_backbone);

    double epoch_loss = 0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      std::vector<std::size_t> idx(
          order.begin() + static_cast<std::ptrdiff_t>(step * cfg.batch_size),
          order.begin() + static_cast<std::ptrdiff_t>((step + 1) * cfg.batch_size));
      auto inputs = train.make_inputs(idx, /*train_mode=*/true);
      auto targets = train.targets.index_select(
          0, torch::tensor(std::vector<std::int64_t>(idx.begin(), idx.end()), torch::kInt64));
      optimizer.zero_grad();
      auto loss = torch::mse_loss(head->forward(inputs), targets);
      loss.backward();
      optimizer.step();
      epoch_loss += loss.item<double>();
    }
    history.train_loss.push_back(epoch_loss / static_cast<double>(steps_per_epoch));

    const double val_loss = mse_loss_over(val, head);
    history.val_loss.push_back(val_loss);

    // "Fails to improve" means not strictly lower than the best so far.
    // Epoch numbering in the history is 1-based.
    if (val_loss < best_val) {
      best_val = val_loss;
      history.best_epoch = epoch + 1;
      best_weights = clone_all(params);
    }
    history.stopped_epoch = epoch + 1;
    if (cfg.early_stop_patience &&
        history.stopped_epoch - history.best_epoch >= *cfg.early_stop_patience) {
      break;
    }
  }

  restore_all(params, best_weights);
  head->eval();
  if (trainable_backbone) (*trainable_backbone)->eval();
  return history;
}

}  // namespace aqop
