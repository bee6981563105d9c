// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/raster.hpp"

#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace aqop {

namespace {

std::vector<std::string> band_names(ImageType t) {
  if (t == ImageType::RGB) return {"R", "G", "B"};
  return {"B", "G", "R", "NIR"};
}

}  // namespace

void write_raster(const std::string& path, const torch::Tensor& bands, ImageType image_type) {
  auto t = bands.contiguous().to(torch::kFloat32);
  if (t.dim() != 3 || t.size(0) != channel_count(image_type)) {
    throw Error("raster tensor must be CxHxW with C matching image type");
  }
  nlohmann::json sidecar{{"width", t.size(2)},
                         {"height", t.size(1)},
                         {"bands", band_names(image_type)},
                         {"dtype", "float32"},
                         {"layout", "band-sequential"}};
  std::ofstream meta(path + ".json");
  if (!meta) throw Error("cannot write raster sidecar: " + path + ".json");
  meta << sidecar.dump(2) << "\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write raster: " + path);
  out.write(reinterpret_cast<const char*>(t.data_ptr<float>()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

torch::Tensor read_raster(const std::string& path, ImageType expected_type) {
  std::ifstream meta(path + ".json");
  if (!meta) throw Error("missing raster sidecar: " + path + ".json");
  nlohmann::json sidecar = nlohmann::json::parse(meta);
  const auto width = sidecar.at("width").get<std::int64_t>();
  const auto height = sidecar.at("height").get<std::int64_t>();
  const auto bands = sidecar.at("bands").get<std::vector<std::string>>();
  if (sidecar.at("dtype").get<std::string>() != "float32") {
    throw Error("unsupported raster dtype in " + path);
  }
  if (bands != band_names(expected_type)) {
    throw Error("raster band order does not match " + to_string(expected_type) + ": " + path);
  }
  const auto c = static_cast<std::int64_t>(bands.size());

  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open raster: " + path);
  auto t = torch::empty({c, height, width}, torch::kFloat32);
  in.read(reinterpret_cast<char*>(t.data_ptr<float>()),
          static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(t.numel() * sizeof(float))) {
    throw Error("raster file truncated: " + path);
  }
  return t;
}

ScenePatch load_scene(const SceneMeta& meta, const std::string& data_root) {
  namespace fs = std::filesystem;
  fs::path p = meta.path;
  if (p.is_relative() && !data_root.empty()) p = fs::path(data_root) / p;
  ScenePatch patch;
  patch.station_id = meta.station_id;
  patch.date = meta.date;
  patch.image_type = meta.image_type;
  patch.instrument = meta.instrument;
  patch.bands = read_raster(p.string(), meta.image_type);
  patch.validate();
  return patch;
}

}  // namespace aqop
