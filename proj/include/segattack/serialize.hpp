#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "segattack/tensor.hpp"

namespace segattack {

/// Single-file checkpoint container: magic "SGTK0001", a length-prefixed
/// JSON manifest, then the named tensors as little-endian raw doubles in
/// manifest order. Round-trips are bit-exact.
struct Checkpoint {
  std::string manifest_json;                       // caller-defined metadata
  std::vector<std::pair<std::string, Tensor>> tensors;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  const Tensor& tensor(const std::string& name) const;
  bool has(const std::string& name) const;
};

/// Raw tensor file: magic "SGTT0001", rank, dims, little-endian doubles.
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace segattack
