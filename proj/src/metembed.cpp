// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/metembed.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "aqop/rng.hpp"

namespace aqop {

namespace {

struct Row {
  std::array<double, MetVector::kDim> x;
  bool observed;
};

// Recursive extremely randomized tree growth. Split feature and threshold
// are drawn at random; a node stops when pure, too small, or at max depth.
void grow(Tree& tree, int node, std::vector<Row>& rows, std::size_t begin, std::size_t end,
          int depth, const ForestSpec& spec, Rng& rng, int& next_leaf) {
  const std::size_t n = end - begin;
  const bool pure = [&] {
    for (std::size_t i = begin + 1; i < end; ++i) {
      if (rows[i].observed != rows[begin].observed) return false;
    }
    return true;
  }();

  auto make_leaf = [&] {
    tree.nodes[node].feature = -1;
    tree.nodes[node].leaf_index = next_leaf++;
  };

  if (depth >= spec.max_depth || n < 2 || pure) {
    make_leaf();
    return;
  }

  // Draw a random feature with a non-degenerate range; give up after trying
  // every feature (constant columns never produce informative splits).
  int feature = -1;
  double lo = 0, hi = 0;
  std::array<int, MetVector::kDim> candidates;
  for (int i = 0; i < MetVector::kDim; ++i) candidates[i] = i;
  for (int tries = MetVector::kDim; tries > 0; --tries) {
    const int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(tries)));
    const int f = candidates[pick];
    std::swap(candidates[pick], candidates[tries - 1]);
    lo = hi = rows[begin].x[f];
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = std::min(lo, rows[i].x[f]);
      hi = std::max(hi, rows[i].x[f]);
    }
    if (hi > lo) {
      feature = f;
      break;
    }
  }
  if (feature < 0) {
    make_leaf();
    return;
  }

  const double threshold = rng.uniform(lo, hi);
  const auto mid_it = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                     rows.begin() + static_cast<std::ptrdiff_t>(end),
                                     [&](const Row& r) { return r.x[feature] < threshold; });
  const auto mid = static_cast<std::size_t>(mid_it - rows.begin());
  if (mid == begin || mid == end) {
    // threshold fell outside the occupied range (can happen at the open end)
    make_leaf();
    return;
  }

  tree.nodes[node].feature = feature;
  tree.nodes[node].threshold = threshold;
  tree.nodes[node].left = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  grow(tree, tree.nodes[node].left, rows, begin, mid, depth + 1, spec, rng, next_leaf);
  tree.nodes[node].right = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  grow(tree, tree.nodes[node].right, rows, mid, end, depth + 1, spec, rng, next_leaf);
}

}  // namespace

MetForest MetForest::fit(const std::vector<MetVector>& met_rows, const ForestSpec& spec) {
  if (met_rows.size() < 2) throw Error("MetForest::fit: need at least 2 rows");
  if (spec.n_trees < 1 || spec.max_depth < 1) throw Error("MetForest::fit: invalid spec");

  Rng root(spec.seed);
  Rng synth_rng = root.derive("marginal-resample");

  // Balanced binary task: observed rows vs synthetic rows with each column
  // resampled independently from its empirical marginal.
  std::vector<Row> base;
  base.reserve(met_rows.size() * 2);
  for (const auto& m : met_rows) base.push_back({m.values(), true});
  const auto n_obs = met_rows.size();
  for (std::size_t i = 0; i < n_obs; ++i) {
    Row r;
    r.observed = false;
    for (int f = 0; f < MetVector::kDim; ++f) {
      r.x[f] = met_rows[synth_rng.below(n_obs)].values()[f];
    }
    base.push_back(r);
  }

  MetForest forest;
  forest.spec_ = spec;
  int next_leaf = 0;
  for (int t = 0; t < spec.n_trees; ++t) {
    Rng tree_rng = root.derive("tree", static_cast<std::uint64_t>(t));
    std::vector<Row> rows = base;
    Tree tree;
    tree.nodes.emplace_back();
    grow(tree, 0, rows, 0, rows.size(), 0, spec, tree_rng, next_leaf);
    forest.trees_.push_back(std::move(tree));
  }
  forest.dimension_ = next_leaf;
  return forest;
}

std::vector<int> MetForest::embed_indices(const MetVector& met) const {
  if (trees_.empty()) throw Error("MetForest: not fitted");
  const auto x = met.values();
  std::vector<int> out;
  out.reserve(trees_.size());
  for (const auto& tree : trees_) {
    int node = 0;
    while (tree.nodes[node].feature >= 0) {
      const auto& nd = tree.nodes[node];
      node = x[nd.feature] < nd.threshold ? nd.left : nd.right;
    }
    out.push_back(tree.nodes[node].leaf_index);
  }
  return out;
}

std::vector<float> MetForest::embed(const MetVector& met) const {
  std::vector<float> dense(static_cast<std::size_t>(dimension_), 0.0f);
  for (int idx : embed_indices(met)) dense[static_cast<std::size_t>(idx)] = 1.0f;
  return dense;
}

std::string MetForest::to_json() const {
  nlohmann::json j;
  j["n_trees"] = spec_.n_trees;
  j["max_depth"] = spec_.max_depth;
  j["seed"] = spec_.seed;
  j["dimension"] = dimension_;
  j["trees"] = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"leaf_index", n.leaf_index}});
    }
    j["trees"].push_back(std::move(nodes));
  }
  return j.dump();
}

MetForest MetForest::from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  MetForest f;
  f.spec_.n_trees = j.at("n_trees").get<int>();
  f.spec_.max_depth = j.at("max_depth").get<int>();
  f.spec_.seed = j.at("seed").get<std::uint64_t>();
  f.dimension_ = j.at("dimension").get<int>();
  for (const auto& tj : j.at("trees")) {
    Tree tree;
    for (const auto& nj : tj) {
      TreeNode n;
      n.feature = nj.at("feature").get<int>();
      n.threshold = nj.at("threshold").get<double>();
      n.left = nj.at("left").get<int>();
      n.right = nj.at("right").get<int>();
      n.leaf_index = nj.at("leaf_index").get<int>();
      tree.nodes.push_back(n);
    }
    f.trees_.push_back(std::move(tree));
  }
  return f;
}

void MetForest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write forest: " + path);
  out << to_json() << "\n";
}

MetForest MetForest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open forest: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

}  // namespace aqop
