#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace biomass {

/// Tolerance, in percentage points, for the sum constraints on a label row.
inline constexpr double kSimplexTolerance = 0.5;

enum class Category { Basic, Advanced };

std::string_view to_string(Category c);

/// Dry-biomass percentages. Clover decomposes into white + red when the
/// breakdown is known.
struct LabelVector {
  double grass_pct = 0;
  double clover_pct = 0;
  std::optional<double> white_pct;
  std::optional<double> red_pct;
  double weeds_pct = 0;

  bool has_breakdown() const { return white_pct.has_value() && red_pct.has_value(); }

  /// Empty when valid, otherwise a description of the first violated
  /// constraint.
  std::optional<std::string> violation() const;

  bool operator==(const LabelVector&) const = default;
};

struct Sample {
  std::string image_id;
  int harvest_season = 1;
  Category category = Category::Basic;
  LabelVector labels;
  std::filesystem::path image_path;

  bool operator==(const Sample&) const = default;
};

/// Parses the labels CSV. Image paths are resolved against `image_dir`
/// (`<image_dir>/<image_id>.{png,jpg,jpeg}`) when it is non-empty, and
/// each resolved file must exist. With an empty `image_dir` the path is
/// left empty and no file check is made.
///
/// Basic rows may carry white/red values; that is how imputed label files
/// are stored. Advanced rows must carry both.
std::vector<Sample> parse_labels_csv(std::istream& in,
                                     const std::filesystem::path& image_dir = {});

std::vector<Sample> load_dataset(const std::filesystem::path& labels_csv,
                                 const std::filesystem::path& image_dir);

/// Reads labels only, without resolving images.
std::vector<Sample> load_labels(const std::filesystem::path& labels_csv);

/// Writes samples back in the labels CSV schema. Numbers use the shortest
/// representation that round-trips exactly.
void write_labels_csv(std::ostream& out, const std::vector<Sample>& samples);
void save_labels(const std::filesystem::path& path, const std::vector<Sample>& samples);

/// Shortest exact decimal representation of a double.
std::string format_number(double v);

/// Locates `<dir>/<stem>` with a supported image extension.
std::optional<std::filesystem::path> find_image(const std::filesystem::path& dir,
                                                std::string_view stem);

struct SplitManifest {
  std::uint64_t seed = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;

  bool operator==(const SplitManifest&) const = default;
};

/// Seeded uniform split without stratification. Both id lists come back
/// sorted.
SplitManifest split_dataset(const std::vector<Sample>& samples, std::size_t val_count,
                            std::uint64_t seed);

void write_manifest(std::ostream& out, const SplitManifest& m);
SplitManifest read_manifest(std::istream& in);
void save_manifest(const std::filesystem::path& path, const SplitManifest& m);
SplitManifest load_manifest(const std::filesystem::path& path);

/// Samples whose id is listed, in list order. Throws if an id is unknown.
std::vector<Sample> select_samples(const std::vector<Sample>& samples,
                                   const std::vector<std::string>& ids);

}  // namespace biomass
