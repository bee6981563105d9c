// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aqop/types.hpp"

namespace aqop {

struct ForestSpec {
  int n_trees = 256;
  int max_depth = 3;  // up to 2^max_depth leaves per tree
  std::uint64_t seed = 0;
};

// One fitted extremely randomized tree. Nodes are stored in a flat array;
// children of an internal node are indices; leaves carry the index of their
// slot in the forest-wide encoding.
struct TreeNode {
  int feature = -1;       // -1 marks a leaf
  double threshold = 0;
  int left = -1;          // feature < threshold
  int right = -1;
  int leaf_index = -1;    // forest-wide encoding slot, leaves only
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

// Unsupervised extremely randomized forest over the 6 met variables, fitted
// to separate observed rows from synthetic rows whose columns were resampled
// independently from the empirical marginals. Splits are drawn at random
// thresholds on random features; trees grow to max_depth unless a node is
// pure or has fewer than 2 rows. Every embedding has exactly n_trees ones.
class MetForest {
 public:
  static MetForest fit(const std::vector<MetVector>& met_rows, const ForestSpec& spec);

  // Sparse binary leaf encoding; indices of the set bits, one per tree.
  std::vector<int> embed_indices(const MetVector& met) const;
  // Dense 0/1 encoding of length dimension().
  std::vector<float> embed(const MetVector& met) const;

  int dimension() const { return dimension_; }
  const ForestSpec& spec() const { return spec_; }
  const std::vector<Tree>& trees() const { return trees_; }

  std::string to_json() const;
  static MetForest from_json(const std::string& json_text);
  void save(const std::string& path) const;
  static MetForest load(const std::string& path);

 private:
  ForestSpec spec_;
  std::vector<Tree> trees_;
  int dimension_ = 0;
};

}  // namespace aqop
