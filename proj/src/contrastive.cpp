// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/contrastive.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace aqop {

double simsiam_lr(const SimSiamSpec& spec, int epoch) {
  return spec.lr_max * (1.0 + std::cos(std::numbers::pi * epoch / spec.epochs)) / 2.0;
}

torch::Tensor augment_view(const torch::Tensor& bands, const SimSiamSpec& spec, Rng& rng) {
  const auto h = bands.size(1);
  const auto w = bands.size(2);
  const double area_fraction = rng.uniform(spec.crop_scale_min, spec.crop_scale_max);
  const auto side = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::round(std::sqrt(area_fraction * h * w))));
  if (side > std::min(h, w)) throw Error("augment_view: crop larger than scene");

  const auto top = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(h - side + 1)));
  const auto left = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(w - side + 1)));
  auto view = bands.slice(1, top, top + side).slice(2, left, left + side);

  view = torch::nn::functional::interpolate(
             view.unsqueeze(0),
             torch::nn::functional::InterpolateFuncOptions()
                 .size(std::vector<std::int64_t>{spec.view_size, spec.view_size})
                 .mode(torch::kBilinear)
                 .align_corners(false))
             .squeeze(0);

  if (rng.bernoulli(spec.hflip_p)) view = view.flip({2});
  return view.contiguous();
}

torch::Tensor simsiam_loss(const torch::Tensor& p1, const torch::Tensor& z1,
                           const torch::Tensor& p2, const torch::Tensor& z2) {
  auto check = [](const torch::Tensor& t, const char* name) {
    auto norms = t.norm(2, /*dim=*/-1);
    if ((norms == 0).any().item<bool>()) {
      throw Error(std::string("simsiam_loss: zero-norm vector in ") + name);
    }
  };
  check(p1, "p1");
  check(z1, "z1");
  check(p2, "p2");
  check(z2, "z2");
  auto cos = [](const torch::Tensor& a, const torch::Tensor& b) {
    return torch::nn::functional::cosine_similarity(
        a, b, torch::nn::functional::CosineSimilarityFuncOptions().dim(-1).eps(1e-12));
  };
  return -0.5 * (cos(p1, z2.detach()) + cos(p2, z1.detach())).mean();
}

SimSiamHeadsImpl::SimSiamHeadsImpl(const SimSiamSpec& spec) {
  const int d = spec.projector_dim;
  projector = register_module(
      "projector",
      torch::nn::Sequential(
          torch::nn::Linear(torch::nn::LinearOptions(kFeatureDim, d).bias(false)),
          torch::nn::BatchNorm1d(d), torch::nn::ReLU(),
          torch::nn::Linear(torch::nn::LinearOptions(d, d).bias(false)),
          torch::nn::BatchNorm1d(d), torch::nn::ReLU(),
          torch::nn::Linear(torch::nn::LinearOptions(d, d).bias(false)),
          torch::nn::BatchNorm1d(torch::nn::BatchNorm1dOptions(d).affine(false))));
  predictor = register_module(
      "predictor",
      torch::nn::Sequential(
          torch::nn::Linear(torch::nn::LinearOptions(d, spec.predictor_hidden).bias(false)),
          torch::nn::BatchNorm1d(spec.predictor_hidden), torch::nn::ReLU(),
          torch::nn::Linear(spec.predictor_hidden, d)));
}

torch::Tensor SimSiamHeadsImpl::project(torch::Tensor features) {
  return projector->forward(features);
}

torch::Tensor SimSiamHeadsImpl::predict_repr(torch::Tensor z) { return predictor->forward(z); }

SimSiamHistory train_simsiam(Backbone& backbone,
                             const std::vector<std::function<torch::Tensor()>>& load_scene_bands,
                             const SimSiamSpec& spec, std::uint64_t seed) {
  if (load_scene_bands.size() < 2) throw Error("train_simsiam: need at least 2 scenes");

  torch::manual_seed(seed);
  SimSiamHeads heads(spec);
  set_freeze_policy(backbone, FreezePolicy::AllTrainable);

  std::vector<torch::Tensor> params;
  for (auto& p : backbone->parameters()) params.push_back(p);
  for (auto& p : heads->parameters()) params.push_back(p);
  torch::optim::SGD optimizer(params, torch::optim::SGDOptions(spec.lr_max)
                                          .momentum(spec.momentum)
                                          .weight_decay(spec.weight_decay));

  Rng root(seed);
  Rng shuffle_rng = root.derive("simsiam-shuffle");

  SimSiamHistory history;
  std::vector<std::size_t> order(load_scene_bands.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    const double lr = simsiam_lr(spec, epoch);
    for (auto& group : optimizer.param_groups()) {
      static_cast<torch::optim::SGDOptions&>(group.options()).lr(lr);
    }

    shuffle_rng.shuffle(order);
    backbone->train();
    heads->train();

    double loss_sum = 0;
    double std_sum = 0;
    std::size_t n_batches = 0;
    for (std::size_t begin = 0; begin + spec.batch_size <= order.size();
         begin += static_cast<std::size_t>(spec.batch_size)) {
      std::vector<torch::Tensor> v1s, v2s;
      for (int i = 0; i < spec.batch_size; ++i) {
        const auto scene_index = order[begin + static_cast<std::size_t>(i)];
        // Per-scene derived stream: augmentation is independent of worker
        // layout and batch composition.
        Rng view_rng = root.derive("view", static_cast<std::uint64_t>(scene_index))
                           .derive("epoch", static_cast<std::uint64_t>(epoch));
        auto bands = load_scene_bands[scene_index]();
        v1s.push_back(augment_view(bands, spec, view_rng));
        v2s.push_back(augment_view(bands, spec, view_rng));
      }
      auto x1 = torch::stack(v1s);
      auto x2 = torch::stack(v2s);

      auto z1 = heads->project(backbone->forward(x1));
      auto z2 = heads->project(backbone->forward(x2));
      auto p1 = heads->predict_repr(z1);
      auto p2 = heads->predict_repr(z2);

      optimizer.zero_grad();
      auto loss = simsiam_loss(p1, z1, p2, z2);
      loss.backward();
      optimizer.step();

      loss_sum += loss.item<double>();
      {
        torch::NoGradGuard no_grad;
        auto zn = torch::nn::functional::normalize(
            z1, torch::nn::functional::NormalizeFuncOptions().dim(-1));
        std_sum += zn.std(0).mean().item<double>();
      }
      ++n_batches;
    }
    if (n_batches == 0) {
      throw Error("train_simsiam: fewer scenes than one batch");
    }
    history.epoch_loss.push_back(loss_sum / static_cast<double>(n_batches));
    history.repr_std.push_back(std_sum / static_cast<double>(n_batches));
  }

  // The MLPs are discarded; only the trained backbone is kept.
  backbone->eval();
  return history;
}

}  // namespace aqop
