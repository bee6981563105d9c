// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include <torch/torch.h>

#include <json.hpp>

namespace aqop {

// Flat archive of named tensors: magic, JSON header (name -> shape, dtype,
// byte offset), CRC32-checksummed payload. The one checkpoint format used
// for backbones, heads, and full experiment checkpoints.
//
// Layout:
//   bytes 0..7    "AQTENS1\n"
//   bytes 8..15   little-endian u64 header length
//   header        JSON: {"tensors": {name: {shape, dtype, offset, nbytes}},
//                        "crc32": <payload checksum>, "meta": {...}}
//   payload       raw little-endian tensor bytes, contiguous
class TensorArchive {
 public:
  void put(const std::string& name, const torch::Tensor& t);
  torch::Tensor get(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }
  const std::map<std::string, torch::Tensor>& tensors() const { return tensors_; }

  nlohmann::json& meta() { return meta_; }
  const nlohmann::json& meta() const { return meta_; }

  void save(const std::string& path) const;
  static TensorArchive load(const std::string& path);

  // State-dict helpers. Loading verifies every destination tensor is present
  // with a matching shape before any assignment; a mismatch names the
  // offending tensor and leaves the module untouched.
  void put_module(const std::string& prefix, const torch::nn::Module& module);
  void load_into_module(const std::string& prefix, torch::nn::Module& module) const;

 private:
  std::map<std::string, torch::Tensor> tensors_;
  nlohmann::json meta_ = nlohmann::json::object();
};

}  // namespace aqop
