// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "aqop/types.hpp"

namespace aqop {

// Lossless band-sequential float32 raster with a JSON sidecar
// ("<path>.json") declaring width, height, band order, and dtype.
// Band order is R,G,B for RGB scenes and B,G,R,NIR for TOAR scenes.
void write_raster(const std::string& path, const torch::Tensor& bands, ImageType image_type);
torch::Tensor read_raster(const std::string& path, ImageType expected_type);

ScenePatch load_scene(const SceneMeta& meta, const std::string& data_root);

}  // namespace aqop
