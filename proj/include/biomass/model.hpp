#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "biomass/extractor.hpp"
#include "biomass/image.hpp"
#include "biomass/layers.hpp"
#include "biomass/tensor_file.hpp"

namespace biomass {

/// Output order of the network: grass, white clover, red clover, weeds.
inline constexpr std::size_t kGrass = 0, kWhite = 1, kRed = 2, kWeeds = 3;

/// Frozen extractor followed by the trainable head. Images are resized to
/// out_size x out_size before feature extraction.
class BiomassModel {
 public:
  BiomassModel(const ExtractorConfig& extractor, int out_size,
               const std::vector<std::size_t>& hidden, std::uint64_t head_seed);

  /// Rebuilds a model from `to_tensors()` output. Throws InputError on
  /// missing or inconsistent tensors.
  static BiomassModel from_tensors(const std::vector<NamedTensor>& tensors);
  std::vector<NamedTensor> to_tensors() const;

  /// Features for images that already have the model's input size.
  Tensor<float> features(const std::vector<const Image*>& images) const;

  /// Resizes (no augmentation) and extracts features for one image.
  Tensor<float> features_of(const Image& image) const;

  /// Head probabilities in inference mode, [n, 4].
  Tensor<float> predict_fractions(const Tensor<float>& features);

  Extractor<float>& extractor() { return extractor_; }
  const Extractor<float>& extractor() const { return extractor_; }
  Head<float>& head() { return head_; }
  const Head<float>& head() const { return head_; }
  int out_size() const { return out_size_; }

 private:
  BiomassModel() = default;

  Extractor<float> extractor_;
  Head<float> head_;
  int out_size_ = 0;
};

/// Best-so-far training state.
struct Checkpoint {
  std::vector<NamedTensor> model;  ///< BiomassModel::to_tensors()
  int epoch = 0;
  float val_loss = 0;
  std::uint64_t config_hash = 0;

  std::vector<NamedTensor> to_tensors() const;
  static Checkpoint from_tensors(const std::vector<NamedTensor>& tensors);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace biomass
