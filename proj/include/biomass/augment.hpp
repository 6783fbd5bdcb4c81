#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "biomass/image.hpp"
#include "biomass/labels.hpp"
#include "biomass/rng.hpp"

namespace biomass {

struct AugmentConfig {
  double rotation_deg = 15.0;
  double zoom_frac = 0.15;
  double shift_frac = 0.20;
  double shear_deg = 15.0;
  bool hflip = true;
  double channel_shift = 50.0;
  int out_size = 500;
  int variants_per_image = 10;

  /// Throws InputError on negative ranges or non-positive sizes.
  void validate() const;

  /// Every range zero and flips off.
  static AugmentConfig disabled(int out_size, int variants = 1);
};

/// One concrete sampled transformation.
struct AffineDraw {
  double angle_deg = 0;
  double zoom_x = 1;
  double zoom_y = 1;
  double shift_x = 0;  ///< fraction of width
  double shift_y = 0;  ///< fraction of height
  double shear_deg = 0;
  bool flip = false;
  std::array<double, 3> channel_offset{0, 0, 0};

  bool operator==(const AffineDraw&) const = default;
};

/// Samples every parameter uniformly from its configured range. The flip is
/// a fair coin when enabled.
AffineDraw draw_params(const AugmentConfig& config, Rng& rng);

/// Resamples `image` to out_size x out_size through one inverse affine map.
///
/// Output pixel centres are taken relative to the output centre, mapped by
/// rotation * shear * zoom, scaled to source pixels (this folds the resize
/// into the warp), offset by the shift and read with nearest-neighbour
/// sampling. Out-of-range coordinates wrap modulo the source dimensions.
/// Channel offsets are added and the result clamped to [0, 255]; the
/// horizontal flip is the last step.
Image apply_affine(const Image& image, const AffineDraw& draw, int out_size);

struct SampleWeights {
  double basic = 1.0;
  double advanced = 1.5;

  double of(Category c) const { return c == Category::Basic ? basic : advanced; }
};

struct AugmentedItem {
  std::string image_id;
  int variant = 0;
  Image image;
  LabelVector labels;
  double weight = 1.0;
};

/// Per-item generator seed. Independent of iteration order.
std::uint64_t item_seed(std::uint64_t base_seed, int epoch, std::string_view image_id, int variant);

/// Lazily evaluated epoch of augmented items: variants_per_image items per
/// sample, indexed sample-major. Items can be produced in any order or
/// concurrently; each depends only on its own (seed, epoch, id, variant).
class AugmentStream {
 public:
  using Loader = std::function<Image(const Sample&)>;

  AugmentStream(std::vector<Sample> samples, AugmentConfig config, int epoch,
                std::uint64_t base_seed, SampleWeights weights = {}, Loader loader = {});

  std::size_t size() const { return samples_.size() * config_.variants_per_image; }
  std::size_t sample_count() const { return samples_.size(); }
  int variants() const { return config_.variants_per_image; }
  const Sample& sample(std::size_t i) const { return samples_[i]; }

  AffineDraw draw(std::size_t sample_index, int variant) const;

  /// Loads the source image and produces item `index`.
  AugmentedItem item(std::size_t index) const;

  /// Produces item (sample_index, variant) from an already decoded source.
  AugmentedItem item(std::size_t sample_index, int variant, const Image& source) const;

  Image load(std::size_t sample_index) const;

 private:
  std::vector<Sample> samples_;
  AugmentConfig config_;
  int epoch_;
  std::uint64_t base_seed_;
  SampleWeights weights_;
  Loader loader_;
};

/// Validates that every sample is fully labelled and builds the stream.
AugmentStream augment_epoch(const std::vector<Sample>& samples, const AugmentConfig& config,
                            int epoch, std::uint64_t base_seed, SampleWeights weights = {},
                            AugmentStream::Loader loader = {});

}  // namespace biomass
