#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "biomass/metrics.hpp"
#include "biomass/pipeline.hpp"

namespace biomass {

/// Flat `key = value` experiment file. One key per line; `#` starts a
/// comment. Unknown or repeated keys are rejected.
struct RunConfig {
  std::filesystem::path labels_csv;
  std::filesystem::path image_dir;
  std::filesystem::path out_dir;
  /// When unset, the split is drawn from `seed` and written to out_dir.
  std::optional<std::filesystem::path> split_manifest;
  std::size_t val_count = 52;
  OverallMode overall = OverallMode::Pooled;
  TrainConfig train;

  /// Relative paths are resolved against `base_dir`. With `require_paths`
  /// false the three path keys may be omitted (augmentation preview).
  static RunConfig parse(std::istream& in, const std::filesystem::path& base_dir = {},
                         bool require_paths = true);
  static RunConfig load(const std::filesystem::path& path, bool require_paths = true);

  static const std::vector<std::string>& keys();
};

/// Parses "4096,256,4": hidden widths followed by the 4-unit output layer,
/// which must be last. Returns the hidden widths.
std::vector<std::size_t> parse_head_dims(const std::string& text);

}  // namespace biomass
