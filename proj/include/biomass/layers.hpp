#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "biomass/autograd.hpp"
#include "biomass/rng.hpp"

namespace biomass {

/// Half-width of the uniform kernel initializer.
inline constexpr double kUniformInitLimit = 0.05;

template <typename T>
struct DenseLayer {
  Parameter<T> weight;  // [in, out]
  Parameter<T> bias;    // [out]

  DenseLayer() = default;
  DenseLayer(std::string name, std::size_t in, std::size_t out, Rng& rng,
             double limit = kUniformInitLimit);

  std::size_t in_features() const { return weight.value.dim(0); }
  std::size_t out_features() const { return weight.value.dim(1); }

  NodeId forward(Graph<T>& g, NodeId x);
};

/// y = x W + b without recording a graph.
template <typename T>
Tensor<T> dense_forward(const DenseLayer<T>& layer, const Tensor<T>& x);

enum class BatchNormMode { Train, Inference };

template <typename T>
struct BatchNormLayer {
  Parameter<T> gamma;
  Parameter<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.9);
  T epsilon = T(1e-5);
  BatchNormMode mode = BatchNormMode::Train;

  BatchNormLayer() = default;
  BatchNormLayer(std::string name, std::size_t features);

  /// Train mode normalizes with the batch statistics and folds them into
  /// the running estimates; Inference mode uses the running estimates.
  NodeId forward(Graph<T>& g, NodeId x);
};

/// Graph-free batch norm. Updates running statistics in Train mode.
template <typename T>
Tensor<T> batchnorm_forward(BatchNormLayer<T>& layer, const Tensor<T>& x);

/// Row-wise softmax; throws on non-finite input.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x);

/// sqrt( sum_i w_i * mean_j (pred_ij - target_ij)^2 / sum_i w_i ).
template <typename T>
T weighted_rmse_loss(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& weights);

/// Trainable regression head: for each hidden width a dense layer with ReLU
/// followed by batch normalization, then a dense output layer and softmax.
template <typename T>
class Head {
 public:
  static constexpr std::size_t kOutputs = 4;

  Head() = default;
  /// `hidden` lists the hidden widths; the output layer has kOutputs units.
  Head(std::size_t in_features, const std::vector<std::size_t>& hidden, std::uint64_t seed);
  /// Assembles a head from existing layers; needs one more dense layer than
  /// norm layers, with chaining widths.
  Head(std::vector<DenseLayer<T>> dense, std::vector<BatchNormLayer<T>> norms);

  /// Probabilities [batch, 4].
  NodeId forward(Graph<T>& g, NodeId features);
  Tensor<T> predict(const Tensor<T>& features);

  void set_mode(BatchNormMode mode);

  std::vector<Parameter<T>*> parameters();
  std::vector<DenseLayer<T>>& dense_layers() { return dense_; }
  std::vector<BatchNormLayer<T>>& norm_layers() { return norms_; }
  const std::vector<DenseLayer<T>>& dense_layers() const { return dense_; }
  const std::vector<BatchNormLayer<T>>& norm_layers() const { return norms_; }

  std::size_t in_features() const { return dense_.front().in_features(); }
  std::vector<std::size_t> hidden_dims() const;

 private:
  std::vector<DenseLayer<T>> dense_;
  std::vector<BatchNormLayer<T>> norms_;
};

}  // namespace biomass
