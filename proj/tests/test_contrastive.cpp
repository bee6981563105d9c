// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>

#include "aqop_doctest.h"

#include "aqop/backbone.hpp"
#include "aqop/contrastive.hpp"
#include "aqop/rng.hpp"
#include "aqop/types.hpp"

using aqop::SimSiamSpec;

TEST_CASE("cosine learning rate schedule endpoints and monotonicity") {
  SimSiamSpec spec;
  spec.lr_max = 0.005;
  spec.epochs = 100;
  CHECK(aqop::simsiam_lr(spec, 0) == doctest::Approx(0.005));
  CHECK(aqop::simsiam_lr(spec, 100) == doctest::Approx(0.0));
  CHECK(aqop::simsiam_lr(spec, 50) == doctest::Approx(0.0025));
  for (int e = 1; e <= 100; ++e) {
    CHECK(aqop::simsiam_lr(spec, e) < aqop::simsiam_lr(spec, e - 1));
  }
}

TEST_CASE("symmetric loss takes its known values") {
  auto a = torch::tensor({{1.0f, 0.0f}});
  auto b = torch::tensor({{0.0f, 1.0f}});
  auto na = torch::tensor({{-1.0f, 0.0f}});
  auto a3 = torch::tensor({{3.0f, 0.0f}});  // scale must not matter

  CHECK(aqop::simsiam_loss(a, a3, a3, a).item<double>() == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(aqop::simsiam_loss(a, b, a, b).item<double>() == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(aqop::simsiam_loss(a, na, a, na).item<double>() == doctest::Approx(1.0).epsilon(1e-6));

  SUBCASE("bounded on random batches") {
    torch::manual_seed(0);
    for (int i = 0; i < 20; ++i) {
      auto p1 = torch::randn({8, 32});
      auto z1 = torch::randn({8, 32});
      auto p2 = torch::randn({8, 32});
      auto z2 = torch::randn({8, 32});
      const double l = aqop::simsiam_loss(p1, z1, p2, z2).item<double>();
      CHECK(l >= -1.0 - 1e-6);
      CHECK(l <= 1.0 + 1e-6);
    }
  }
  SUBCASE("zero-norm rows are rejected") {
    auto zero = torch::zeros({1, 2});
    CHECK_THROWS_AS(aqop::simsiam_loss(zero, a, a, a), aqop::Error);
  }
}

TEST_CASE("stop-gradient blocks the z path exactly") {
  auto p1 = torch::randn({4, 16}, torch::requires_grad());
  auto z1 = torch::randn({4, 16}, torch::requires_grad());
  auto p2 = torch::randn({4, 16}, torch::requires_grad());
  auto z2 = torch::randn({4, 16}, torch::requires_grad());
  auto loss = aqop::simsiam_loss(p1, z1, p2, z2);
  loss.backward();
  CHECK(p1.grad().defined());
  CHECK(p2.grad().defined());
  CHECK(p1.grad().abs().sum().item<double>() > 0);
  // The z inputs are behind the stop gradient: no gradient may reach them.
  const bool z1_blocked = !z1.grad().defined() || z1.grad().abs().sum().item<double>() == 0.0;
  const bool z2_blocked = !z2.grad().defined() || z2.grad().abs().sum().item<double>() == 0.0;
  CHECK(z1_blocked);
  CHECK(z2_blocked);
}

TEST_CASE("augmented views have the right shape and value range") {
  SimSiamSpec spec;
  spec.view_size = 32;
  auto bands = torch::rand({3, 128, 128});
  const float lo = bands.min().item<float>();
  const float hi = bands.max().item<float>();
  aqop::Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    auto view = aqop::augment_view(bands, spec, rng);
    CHECK(view.sizes() == torch::IntArrayRef({3, 32, 32}));
    // Bilinear resampling is a convex combination of input pixels.
    CHECK(view.min().item<float>() >= lo - 1e-5);
    CHECK(view.max().item<float>() <= hi + 1e-5);
  }
  aqop::Rng r1(7), r2(7);
  CHECK(torch::equal(aqop::augment_view(bands, spec, r1), aqop::augment_view(bands, spec, r2)));
}

TEST_CASE("full-crop no-flip view reproduces the resized input") {
  SimSiamSpec spec;
  spec.crop_scale_min = 1.0;
  spec.crop_scale_max = 1.0;
  spec.hflip_p = 0.0;
  spec.view_size = 16;
  auto bands = torch::rand({3, 16, 16});
  aqop::Rng rng(2);
  auto view = aqop::augment_view(bands, spec, rng);
  CHECK(torch::allclose(view, bands, 1e-5, 1e-5));
}

TEST_CASE("projector and predictor dimensions") {
  SimSiamSpec spec;
  aqop::SimSiamHeads heads(spec);
  heads->eval();
  auto z = heads->project(torch::rand({2, aqop::kFeatureDim}));
  CHECK(z.sizes() == torch::IntArrayRef({2, 2048}));
  auto p = heads->predict_repr(z);
  CHECK(p.sizes() == torch::IntArrayRef({2, 2048}));
}

TEST_CASE("contrastive training runs and reports a collapse monitor") {
  auto backbone = aqop::build_backbone(
      {aqop::InitMode::Random, 3, aqop::FreezePolicy::AllTrainable, std::nullopt}, 3);
  torch::manual_seed(5);
  std::vector<std::function<torch::Tensor()>> loaders;
  for (int i = 0; i < 4; ++i) {
    auto scene = torch::rand({3, 48, 48});
    loaders.push_back([scene]() { return scene; });
  }
  SimSiamSpec spec;
  spec.epochs = 2;
  spec.batch_size = 2;
  spec.view_size = 32;
  auto hist = aqop::train_simsiam(backbone, loaders, spec, 1);
  REQUIRE(hist.epoch_loss.size() == 2);
  REQUIRE(hist.repr_std.size() == 2);
  for (double l : hist.epoch_loss) {
    CHECK(l >= -1.0 - 1e-6);
    CHECK(l <= 1.0 + 1e-6);
  }
  for (double s : hist.repr_std) CHECK(s > 0.0);
  CHECK_FALSE(backbone->is_training());  // returned ready for feature extraction

  SUBCASE("too few scenes is an error") {
    std::vector<std::function<torch::Tensor()>> one = {loaders[0]};
    CHECK_THROWS_AS(aqop::train_simsiam(backbone, one, spec, 1), aqop::Error);
  }
}
