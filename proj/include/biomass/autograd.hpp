#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>

#include "biomass/tensor.hpp"

namespace biomass {

/// A named learnable (or frozen) tensor. Frozen parameters never receive a
/// gradient buffer.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v, bool train = true)
      : name(std::move(n)), value(std::move(v)), trainable(train) {}

  bool has_grad() const { return trainable && !grad.empty(); }
  void zero_grad() {
    if (trainable) grad = Tensor<T>(value.shape());
  }
};

using NodeId = std::size_t;

/// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse
/// sweep visits every node after all of its consumers.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, NodeId self)>;

  /// Leaf with no gradient.
  NodeId constant(Tensor<T> value);
  /// Leaf whose gradient is kept (used to check input gradients).
  NodeId input(Tensor<T> value);
  /// Leaf bound to a parameter; backward accumulates into `p.grad` when the
  /// parameter is trainable.
  NodeId parameter(Parameter<T>& p);

  /// Appends an op result. The node requires a gradient iff any parent does.
  NodeId record(Tensor<T> value, std::initializer_list<NodeId> parents, BackwardFn backward);

  /// Parameter leaves alias the parameter's storage rather than copying it.
  const Tensor<T>& value(NodeId id) const {
    const auto& n = node(id);
    return n.param ? n.param->value : n.value;
  }
  bool requires_grad(NodeId id) const { return node(id).requires_grad; }

  /// Gradient of the last backward() target with respect to `id`. Throws
  /// if the node does not track gradients or backward has not run.
  const Tensor<T>& grad(NodeId id) const;

  /// Accumulation buffer for `id`, zero-initialized on first use. For ops.
  Tensor<T>& grad_buffer(NodeId id);
  bool has_grad_buffer(NodeId id) const { return !node(id).grad.empty(); }

  /// Propagates d(loss)/d(node) through the tape. `loss` must hold one
  /// element. A graph can be backpropagated once.
  void backward(NodeId loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
  };

  const Node& node(NodeId id) const;
  Node& node(NodeId id);

  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

/// Per-feature statistics from a training-mode batch norm.
template <typename T>
struct BatchStats {
  Tensor<T> mean;
  Tensor<T> var;  // population variance
};

// Differentiable ops. Shapes are checked; mismatches throw ComputeError.
namespace ops {

/// x [batch, in] * w [in, out] + b [out].
template <typename T>
NodeId dense(Graph<T>& g, NodeId x, NodeId w, NodeId b);

template <typename T>
NodeId relu(Graph<T>& g, NodeId x);

/// Normalizes x [batch, features] with the batch's own statistics.
/// Requires batch >= 2. The statistics are returned through `stats`.
template <typename T>
NodeId batch_norm_train(Graph<T>& g, NodeId x, NodeId gamma, NodeId beta, T epsilon,
                        BatchStats<T>* stats = nullptr);

/// Normalizes with fixed statistics.
template <typename T>
NodeId batch_norm_fixed(Graph<T>& g, NodeId x, NodeId gamma, NodeId beta, const Tensor<T>& mean,
                        const Tensor<T>& var, T epsilon);

template <typename T>
NodeId softmax(Graph<T>& g, NodeId x);

/// sqrt( sum_i w_i * mean_j (pred_ij - target_ij)^2 / sum_i w_i ).
template <typename T>
NodeId weighted_rmse(Graph<T>& g, NodeId pred, const Tensor<T>& target, const Tensor<T>& weights);

/// mean(x^2) over all elements.
template <typename T>
NodeId mean_square(Graph<T>& g, NodeId x);

/// sum(coeffs * x); a scalar probe for checking individual op gradients.
template <typename T>
NodeId dot(Graph<T>& g, NodeId x, const Tensor<T>& coeffs);

template <typename T>
NodeId conv3x3(Graph<T>& g, NodeId x, NodeId weight, NodeId bias);

template <typename T>
NodeId max_pool2(Graph<T>& g, NodeId x);

/// [batch, ...] -> [batch, rest].
template <typename T>
NodeId flatten(Graph<T>& g, NodeId x);

}  // namespace ops

}  // namespace biomass
