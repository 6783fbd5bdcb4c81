#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "biomass/tensor.hpp"

namespace biomass {

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;

  bool operator==(const NamedTensor&) const = default;
};

/// Binary tensor collection ("BIOM" container).
///
///   magic    4 bytes  "BIOM"
///   version  u32      currently 1
///   count    u32      number of tensors
///   per tensor:
///     name_len u16, name (UTF-8, name_len bytes)
///     rank     u8
///     dims     rank x u32
///     data     prod(dims) x f32
///
/// All integers and floats are little-endian. Names must be unique and
/// dimensions positive.
inline constexpr std::uint32_t kTensorFileVersion = 1;

void write_tensor_file(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensor_file(std::istream& in);

void save_tensor_file(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensor_file(const std::filesystem::path& path);

/// Lookup by name; nullptr when absent.
const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

}  // namespace biomass
