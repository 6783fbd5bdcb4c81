#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "biomass/autograd.hpp"
#include "biomass/image.hpp"
#include "biomass/tensor_file.hpp"

namespace biomass {

/// `convs` 3x3 conv + ReLU layers followed by one 2x2 max pool.
struct ConvBlock {
  int out_channels = 8;
  int convs = 1;

  bool operator==(const ConvBlock&) const = default;
};

/// Input scaling applied before the first convolution.
enum class Preprocess {
  Unit,   ///< RGB / 255
  Caffe,  ///< BGR order, per-channel ImageNet mean subtracted, 0..255 scale
};

struct RandomWeights {
  std::uint64_t seed = 0;
};
struct WeightFile {
  std::filesystem::path path;
};

struct ExtractorConfig {
  std::vector<ConvBlock> blocks{{8, 1}, {16, 1}};
  Preprocess preprocess = Preprocess::Unit;
  std::variant<RandomWeights, WeightFile> weights_source = RandomWeights{};
};

/// Parses "8,16" (one conv per block), "64x2,128x2" (convs per block) or the
/// alias "vgg16".
std::vector<ConvBlock> parse_blocks(const std::string& text);
std::string format_blocks(const std::vector<ConvBlock>& blocks);

Preprocess parse_preprocess(const std::string& text);

/// Parses "random:<seed>" or "file:<path>".
std::variant<RandomWeights, WeightFile> parse_weights_source(const std::string& text);

/// Fully convolutional feature extractor; the final feature map is flattened.
/// Parameters are frozen unless `set_trainable(true)` is called.
template <typename T>
class Extractor {
 public:
  Extractor() = default;
  /// Random weights (He-uniform, zero bias) or weights read from a tensor
  /// file whose shapes must match the block layout.
  explicit Extractor(const ExtractorConfig& config);
  Extractor(std::vector<ConvBlock> blocks, Preprocess preprocess,
            const std::vector<NamedTensor>& tensors);

  /// images [batch, 3, h, w] -> features [batch, n]. Records nothing.
  Tensor<T> forward(const Tensor<T>& images) const;

  /// Same computation on a graph, for when the extractor is trainable.
  NodeId forward(Graph<T>& g, NodeId images);

  std::size_t feature_count(std::size_t height, std::size_t width) const;

  /// Converts an image to a [1, 3, h, w] tensor with this extractor's
  /// preprocessing.
  Tensor<T> image_tensor(const Image& image) const;

  /// Stacks images of equal size into [n, 3, h, w].
  Tensor<T> batch_tensor(const std::vector<const Image*>& images) const;

  void set_trainable(bool trainable);
  std::vector<Parameter<T>*> parameters();
  const std::vector<Parameter<T>>& weights() const { return weights_; }
  const std::vector<Parameter<T>>& biases() const { return biases_; }
  const std::vector<ConvBlock>& blocks() const { return blocks_; }
  Preprocess preprocess() const { return preprocess_; }

  /// Weights as named tensors (`extractor.conv<i>.weight` / `.bias`).
  std::vector<NamedTensor> to_tensors() const;

 private:
  void init_random(std::uint64_t seed);
  void load(const std::vector<NamedTensor>& tensors);

  std::vector<ConvBlock> blocks_;
  Preprocess preprocess_ = Preprocess::Unit;
  std::vector<Parameter<T>> weights_;  // [out, in, 3, 3]
  std::vector<Parameter<T>> biases_;   // [out]
};

}  // namespace biomass
