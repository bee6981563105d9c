// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace aqop {

// Observed-vs-estimated scatter with identical x/y limits and a 1:1 line.
void write_scatter_svg(const std::string& path, const std::vector<double>& observed,
                       const std::vector<double>& estimated, const std::string& title);

// Train/validation loss curves with a dotted marker at the epoch of the
// minimum validation loss (1-based).
void write_loss_curve_svg(const std::string& path, const std::vector<double>& train_loss,
                          const std::vector<double>& val_loss, int best_epoch,
                          const std::string& title);

}  // namespace aqop
