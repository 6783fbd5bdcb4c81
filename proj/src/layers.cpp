#include "biomass/layers.hpp"

#include <cmath>

#include "biomass/kernels.hpp"

namespace biomass {

template <typename T>
DenseLayer<T>::DenseLayer(std::string name, std::size_t in, std::size_t out, Rng& rng, double limit)
    : weight(name + ".weight", Tensor<T>({in, out})), bias(name + ".bias", Tensor<T>({out})) {
  for (auto& w : weight.value.data()) w = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
NodeId DenseLayer<T>::forward(Graph<T>& g, NodeId x) {
  return ops::dense(g, x, g.parameter(weight), g.parameter(bias));
}

template <typename T>
Tensor<T> dense_forward(const DenseLayer<T>& layer, const Tensor<T>& x) {
  return kernels::affine(x, layer.weight.value, layer.bias.value);
}

template <typename T>
BatchNormLayer<T>::BatchNormLayer(std::string name, std::size_t features)
    : gamma(name + ".gamma", Tensor<T>({features}, T(1))),
      beta(name + ".beta", Tensor<T>({features})),
      running_mean({features}),
      running_var({features}, T(1)) {}

template <typename T>
NodeId BatchNormLayer<T>::forward(Graph<T>& g, NodeId x) {
  const auto gm = g.parameter(gamma);
  const auto bt = g.parameter(beta);
  if (mode == BatchNormMode::Inference) {
    return ops::batch_norm_fixed(g, x, gm, bt, running_mean, running_var, epsilon);
  }
  BatchStats<T> stats;
  const auto y = ops::batch_norm_train(g, x, gm, bt, epsilon, &stats);
  for (std::size_t c = 0; c < running_mean.size(); ++c) {
    running_mean[c] = momentum * running_mean[c] + (T(1) - momentum) * stats.mean[c];
    running_var[c] = momentum * running_var[c] + (T(1) - momentum) * stats.var[c];
  }
  return y;
}

template <typename T>
Tensor<T> batchnorm_forward(BatchNormLayer<T>& layer, const Tensor<T>& x) {
  Graph<T> g;
  return g.value(layer.forward(g, g.constant(x)));
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  return kernels::softmax_rows(x);
}

template <typename T>
T weighted_rmse_loss(const Tensor<T>& pred, const Tensor<T>& target, const Tensor<T>& weights) {
  Graph<T> g;
  return g.value(ops::weighted_rmse(g, g.constant(pred), target, weights))[0];
}

template <typename T>
Head<T>::Head(std::size_t in_features, const std::vector<std::size_t>& hidden, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t in = in_features;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    dense_.emplace_back("head.dense" + std::to_string(i), in, hidden[i], rng);
    norms_.emplace_back("head.bn" + std::to_string(i), hidden[i]);
    in = hidden[i];
  }
  dense_.emplace_back("head.dense" + std::to_string(hidden.size()), in, kOutputs, rng);
}

template <typename T>
Head<T>::Head(std::vector<DenseLayer<T>> dense, std::vector<BatchNormLayer<T>> norms)
    : dense_(std::move(dense)), norms_(std::move(norms)) {
  if (dense_.size() != norms_.size() + 1) throw InputError("head: expected one more dense layer than norm layers");
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    const auto& d = dense_[i];
    if (d.weight.value.rank() != 2 || d.bias.value.shape() != Shape{d.out_features()}) {
      throw InputError("head: malformed dense layer " + std::to_string(i));
    }
    if (i > 0 && d.in_features() != dense_[i - 1].out_features()) {
      throw InputError("head: width mismatch at dense layer " + std::to_string(i));
    }
    if (i < norms_.size()) {
      const Shape f{d.out_features()};
      const auto& n = norms_[i];
      if (n.gamma.value.shape() != f || n.beta.value.shape() != f ||
          n.running_mean.shape() != f || n.running_var.shape() != f) {
        throw InputError("head: malformed batch norm layer " + std::to_string(i));
      }
    }
  }
  if (dense_.back().out_features() != kOutputs) throw InputError("head: output layer must have 4 units");
}

template <typename T>
NodeId Head<T>::forward(Graph<T>& g, NodeId features) {
  NodeId h = features;
  for (std::size_t i = 0; i < norms_.size(); ++i) {
    h = dense_[i].forward(g, h);
    h = ops::relu(g, h);
    h = norms_[i].forward(g, h);
  }
  h = dense_.back().forward(g, h);
  return ops::softmax(g, h);
}

template <typename T>
Tensor<T> Head<T>::predict(const Tensor<T>& features) {
  Tensor<T> h = features;
  for (std::size_t i = 0; i < norms_.size(); ++i) {
    h = dense_forward(dense_[i], h);
    kernels::relu_inplace(h);
    h = batchnorm_forward(norms_[i], h);
  }
  return softmax(dense_forward(dense_.back(), h));
}

template <typename T>
void Head<T>::set_mode(BatchNormMode mode) {
  for (auto& n : norms_) n.mode = mode;
}

template <typename T>
std::vector<Parameter<T>*> Head<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    out.push_back(&dense_[i].weight);
    out.push_back(&dense_[i].bias);
    if (i < norms_.size()) {
      out.push_back(&norms_[i].gamma);
      out.push_back(&norms_[i].beta);
    }
  }
  return out;
}

template <typename T>
std::vector<std::size_t> Head<T>::hidden_dims() const {
  std::vector<std::size_t> dims;
  for (std::size_t i = 0; i + 1 < dense_.size(); ++i) dims.push_back(dense_[i].out_features());
  return dims;
}

#define BIOMASS_INSTANTIATE_LAYERS(T)                                                      \
  template struct DenseLayer<T>;                                                          \
  template struct BatchNormLayer<T>;                                                      \
  template class Head<T>;                                                                 \
  template Tensor<T> dense_forward(const DenseLayer<T>&, const Tensor<T>&);               \
  template Tensor<T> batchnorm_forward(BatchNormLayer<T>&, const Tensor<T>&);             \
  template Tensor<T> softmax(const Tensor<T>&);                                           \
  template T weighted_rmse_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

BIOMASS_INSTANTIATE_LAYERS(float)
BIOMASS_INSTANTIATE_LAYERS(double)

}  // namespace biomass
