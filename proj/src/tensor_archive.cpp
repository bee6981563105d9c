// Copyright 2026 The aqop Authors
// SPDX-License-Identifier: Apache-2.0

#include "aqop/tensor_archive.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <zlib.h>

#include "aqop/types.hpp"

namespace aqop {

namespace {

constexpr char kMagic[8] = {'A', 'Q', 'T', 'E', 'N', 'S', '1', '\n'};

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "float32";
    case torch::kFloat64: return "float64";
    case torch::kInt64: return "int64";
    case torch::kInt32: return "int32";
    case torch::kUInt8: return "uint8";
    default: throw Error("tensor archive: unsupported dtype");
  }
}

torch::ScalarType dtype_from_name(const std::string& s) {
  if (s == "float32") return torch::kFloat32;
  if (s == "float64") return torch::kFloat64;
  if (s == "int64") return torch::kInt64;
  if (s == "int32") return torch::kInt32;
  if (s == "uint8") return torch::kUInt8;
  throw Error("tensor archive: unknown dtype '" + s + "'");
}

}  // namespace

void TensorArchive::put(const std::string& name, const torch::Tensor& t) {
  tensors_[name] = t.detach().cpu().contiguous().clone();
}

torch::Tensor TensorArchive::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error("tensor archive: missing tensor '" + name + "'");
  return it->second;
}

void TensorArchive::save(const std::string& path) const {
  nlohmann::json header;
  header["meta"] = meta_;
  nlohmann::json entries = nlohmann::json::object();

  std::vector<char> payload;
  for (const auto& [name, t] : tensors_) {
    const auto nbytes = static_cast<std::size_t>(t.numel()) * t.element_size();
    nlohmann::json e;
    e["shape"] = std::vector<std::int64_t>(t.sizes().begin(), t.sizes().end());
    e["dtype"] = dtype_name(t.scalar_type());
    e["offset"] = payload.size();
    e["nbytes"] = nbytes;
    entries[name] = std::move(e);
    const auto old = payload.size();
    payload.resize(old + nbytes);
    std::memcpy(payload.data() + old, t.const_data_ptr(), nbytes);
  }
  header["tensors"] = std::move(entries);
  header["crc32"] =
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size()));

  const std::string header_str = header.dump();
  const std::uint64_t header_len = header_str.size();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write tensor archive: " + path);
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error("short write on tensor archive: " + path);
}

TensorArchive TensorArchive::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open tensor archive: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error("not a tensor archive: " + path);
  }
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (in.gcount() != sizeof(header_len)) throw Error("truncated tensor archive: " + path);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (in.gcount() != static_cast<std::streamsize>(header_len)) {
    throw Error("truncated tensor archive header: " + path);
  }
  nlohmann::json header = nlohmann::json::parse(header_str);

  std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto expect_crc = header.at("crc32").get<std::uint32_t>();
  const auto got_crc =
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size()));
  if (expect_crc != got_crc) throw Error("tensor archive checksum mismatch: " + path);

  TensorArchive a;
  a.meta_ = header.value("meta", nlohmann::json::object());
  for (const auto& [name, e] : header.at("tensors").items()) {
    const auto shape = e.at("shape").get<std::vector<std::int64_t>>();
    const auto dtype = dtype_from_name(e.at("dtype").get<std::string>());
    const auto offset = e.at("offset").get<std::size_t>();
    const auto nbytes = e.at("nbytes").get<std::size_t>();
    if (offset + nbytes > payload.size()) {
      throw Error("tensor archive payload truncated at tensor '" + name + "': " + path);
    }
    auto t = torch::empty(shape, dtype);
    if (static_cast<std::size_t>(t.numel()) * t.element_size() != nbytes) {
      throw Error("tensor archive size mismatch for tensor '" + name + "': " + path);
    }
    std::memcpy(t.data_ptr(), payload.data() + offset, nbytes);
    a.tensors_[name] = std::move(t);
  }
  return a;
}

void TensorArchive::put_module(const std::string& prefix, const torch::nn::Module& module) {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  for (const auto& item : module.named_parameters(/*recurse=*/true)) {
    put(p + item.key(), item.value());
  }
  for (const auto& item : module.named_buffers(/*recurse=*/true)) {
    put(p + item.key(), item.value());
  }
}

void TensorArchive::load_into_module(const std::string& prefix, torch::nn::Module& module) const {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  // Validate first so a bad archive never leaves a partially loaded model.
  auto check = [&](const std::string& key, const torch::Tensor& dst) {
    auto it = tensors_.find(p + key);
    if (it == tensors_.end()) throw Error("weight archive missing tensor '" + p + key + "'");
    if (it->second.sizes() != dst.sizes()) {
      throw Error("weight archive shape mismatch for tensor '" + p + key + "'");
    }
  };
  for (const auto& item : module.named_parameters(true)) check(item.key(), item.value());
  for (const auto& item : module.named_buffers(true)) check(item.key(), item.value());

  torch::NoGradGuard no_grad;
  for (const auto& item : module.named_parameters(true)) {
    item.value().copy_(tensors_.at(p + item.key()).to(item.value().dtype()));
  }
  for (const auto& item : module.named_buffers(true)) {
    item.value().copy_(tensors_.at(p + item.key()).to(item.value().dtype()));
  }
}

}  // namespace aqop
