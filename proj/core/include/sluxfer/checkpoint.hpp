#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "sluxfer/tensor.hpp"

namespace sluxfer {

// Self-describing binary container: a JSON header (config, vocabularies,
// metadata) followed by named double-precision tensors.
//
// Layout, all integers little-endian:
//   8 bytes   magic "SLUXCKPT"
//   u32       format version
//   u64       header length, then that many bytes of UTF-8 JSON
//   u64       tensor count
//   per tensor: u32 name length, name bytes, u64 rows, u64 cols,
//               rows*cols IEEE-754 binary64 values in column-major order
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json header = nlohmann::json::object();
  std::map<std::string, Matrix> tensors;

  void put(const ConstTensorList& list, const std::string& prefix = "");
  // Copies stored tensors into `list`; shapes must match exactly.
  void get(const TensorList& list, const std::string& prefix = "") const;
  const Matrix& tensor(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& file);

}  // namespace sluxfer
