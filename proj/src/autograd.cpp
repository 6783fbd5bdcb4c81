#include "biomass/autograd.hpp"

#include <cmath>

#include "biomass/kernels.hpp"

namespace biomass {

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(NodeId id) const {
  if (id >= nodes_.size()) throw ComputeError("graph: unknown node " + std::to_string(id));
  return nodes_[id];
}

template <typename T>
typename Graph<T>::Node& Graph<T>::node(NodeId id) {
  if (id >= nodes_.size()) throw ComputeError("graph: unknown node " + std::to_string(id));
  return nodes_[id];
}

template <typename T>
NodeId Graph<T>::constant(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return nodes_.size() - 1;
}

template <typename T>
NodeId Graph<T>::input(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, true});
  return nodes_.size() - 1;
}

template <typename T>
NodeId Graph<T>::parameter(Parameter<T>& p) {
  nodes_.push_back(Node{{}, {}, {}, &p, p.trainable});
  return nodes_.size() - 1;
}

template <typename T>
NodeId Graph<T>::record(Tensor<T> value, std::initializer_list<NodeId> parents,
                        BackwardFn backward) {
  bool needs = false;
  for (auto p : parents) needs = needs || node(p).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{},
                        nullptr, needs});
  return nodes_.size() - 1;
}

template <typename T>
const Tensor<T>& Graph<T>::grad(NodeId id) const {
  const auto& n = node(id);
  if (!n.requires_grad) throw ComputeError("graph: node does not track gradients");
  if (!backward_done_) throw ComputeError("graph: backward has not been run");
  if (n.grad.empty()) {
    // Not reached by the loss; report an explicit zero.
    const_cast<Node&>(n).grad = Tensor<T>(value(id).shape());
  }
  return n.grad;
}

template <typename T>
Tensor<T>& Graph<T>::grad_buffer(NodeId id) {
  auto& n = node(id);
  if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
  return n.grad;
}

template <typename T>
void Graph<T>::backward(NodeId loss) {
  if (nodes_.empty()) throw ComputeError("backward called before any forward pass");
  if (backward_done_) throw ComputeError("backward called twice on the same graph");
  auto& root = node(loss);
  if (value(loss).size() != 1) {
    throw ComputeError("backward target must be a scalar, got shape " +
                       shape_to_string(value(loss).shape()));
  }
  backward_done_ = true;
  if (!root.requires_grad) return;
  grad_buffer(loss)[0] = T(1);
  for (NodeId id = loss + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param && n.param->trainable) {
      auto& pg = n.param->grad;
      if (pg.empty()) pg = Tensor<T>(n.param->value.shape());
      for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
    }
  }
}

namespace ops {

template <typename T>
NodeId dense(Graph<T>& g, NodeId x, NodeId w, NodeId b) {
  auto y = kernels::affine(g.value(x), g.value(w), g.value(b));
  return g.record(std::move(y), {x, w, b}, [x, w, b](Graph<T>& g, NodeId self) {
    const auto& dy = g.grad_buffer(self);
    kernels::affine_backward(g.value(x), g.value(w), dy,
                             g.requires_grad(x) ? &g.grad_buffer(x) : nullptr,
                             g.requires_grad(w) ? &g.grad_buffer(w) : nullptr,
                             g.requires_grad(b) ? &g.grad_buffer(b) : nullptr);
  });
}

template <typename T>
NodeId relu(Graph<T>& g, NodeId x) {
  auto y = g.value(x);
  kernels::relu_inplace(y);
  return g.record(std::move(y), {x}, [x](Graph<T>& g, NodeId self) {
    const auto& dy = g.grad_buffer(self);
    const auto& in = g.value(x);
    auto& dx = g.grad_buffer(x);
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in[i] > T(0)) dx[i] += dy[i];
    }
  });
}

namespace {

template <typename T>
void check_bn(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
  if (x.rank() != 2) throw ComputeError("batch norm: expected [batch, features], got " + shape_to_string(x.shape()));
  require_shape(gamma.shape(), {x.dim(1)}, "batch norm gamma");
  require_shape(beta.shape(), {x.dim(1)}, "batch norm beta");
}

}  // namespace

template <typename T>
NodeId batch_norm_train(Graph<T>& g, NodeId x, NodeId gamma, NodeId beta, T epsilon,
                        BatchStats<T>* stats) {
  const auto& in = g.value(x);
  check_bn(in, g.value(gamma), g.value(beta));
  const auto n = in.dim(0), f = in.dim(1);
  if (n < 2) throw ComputeError("batch norm: training mode needs a batch of at least 2");
  Tensor<T> mean({f}), var({f});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < f; ++c) mean[c] += in(r, c);
  for (std::size_t c = 0; c < f; ++c) mean[c] /= static_cast<T>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < f; ++c) {
      const T d = in(r, c) - mean[c];
      var[c] += d * d;
    }
  for (std::size_t c = 0; c < f; ++c) var[c] /= static_cast<T>(n);

  Tensor<T> inv_std({f});
  for (std::size_t c = 0; c < f; ++c) inv_std[c] = T(1) / std::sqrt(var[c] + epsilon);
  Tensor<T> xhat(in.shape()), y(in.shape());
  const auto& gm = g.value(gamma);
  const auto& bt = g.value(beta);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < f; ++c) {
      xhat(r, c) = (in(r, c) - mean[c]) * inv_std[c];
      y(r, c) = gm[c] * xhat(r, c) + bt[c];
    }
  if (stats) *stats = {mean, var};

  return g.record(std::move(y), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Graph<T>& g, NodeId self) {
                    const auto& dy = g.grad_buffer(self);
                    const auto n = dy.dim(0), f = dy.dim(1);
                    const auto& gm = g.value(gamma);
                    Tensor<T> sum_dy({f}), sum_dy_xhat({f});
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t c = 0; c < f; ++c) {
                        sum_dy[c] += dy(r, c);
                        sum_dy_xhat[c] += dy(r, c) * xhat(r, c);
                      }
                    if (g.requires_grad(gamma)) {
                      auto& d = g.grad_buffer(gamma);
                      for (std::size_t c = 0; c < f; ++c) d[c] += sum_dy_xhat[c];
                    }
                    if (g.requires_grad(beta)) {
                      auto& d = g.grad_buffer(beta);
                      for (std::size_t c = 0; c < f; ++c) d[c] += sum_dy[c];
                    }
                    if (g.requires_grad(x)) {
                      auto& dx = g.grad_buffer(x);
                      const T nn = static_cast<T>(n);
                      for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t c = 0; c < f; ++c) {
                          dx(r, c) += gm[c] * inv_std[c] / nn *
                                      (nn * dy(r, c) - sum_dy[c] - xhat(r, c) * sum_dy_xhat[c]);
                        }
                    }
                  });
}

template <typename T>
NodeId batch_norm_fixed(Graph<T>& g, NodeId x, NodeId gamma, NodeId beta, const Tensor<T>& mean,
                        const Tensor<T>& var, T epsilon) {
  const auto& in = g.value(x);
  check_bn(in, g.value(gamma), g.value(beta));
  const auto n = in.dim(0), f = in.dim(1);
  require_shape(mean.shape(), {f}, "batch norm running mean");
  require_shape(var.shape(), {f}, "batch norm running var");
  Tensor<T> inv_std({f});
  for (std::size_t c = 0; c < f; ++c) inv_std[c] = T(1) / std::sqrt(var[c] + epsilon);
  Tensor<T> xhat(in.shape()), y(in.shape());
  const auto& gm = g.value(gamma);
  const auto& bt = g.value(beta);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < f; ++c) {
      xhat(r, c) = (in(r, c) - mean[c]) * inv_std[c];
      y(r, c) = gm[c] * xhat(r, c) + bt[c];
    }
  return g.record(std::move(y), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Graph<T>& g, NodeId self) {
                    const auto& dy = g.grad_buffer(self);
                    const auto n = dy.dim(0), f = dy.dim(1);
                    const auto& gm = g.value(gamma);
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t c = 0; c < f; ++c) {
                        if (g.requires_grad(gamma)) g.grad_buffer(gamma)[c] += dy(r, c) * xhat(r, c);
                        if (g.requires_grad(beta)) g.grad_buffer(beta)[c] += dy(r, c);
                        if (g.requires_grad(x)) g.grad_buffer(x)(r, c) += dy(r, c) * gm[c] * inv_std[c];
                      }
                  });
}

template <typename T>
NodeId softmax(Graph<T>& g, NodeId x) {
  auto y = kernels::softmax_rows(g.value(x));
  return g.record(std::move(y), {x}, [x](Graph<T>& g, NodeId self) {
    const auto& y = g.value(self);
    const auto& dy = g.grad_buffer(self);
    auto& dx = g.grad_buffer(x);
    const auto rows = y.dim(0), cols = y.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t c = 0; c < cols; ++c) dot += dy(r, c) * y(r, c);
      for (std::size_t c = 0; c < cols; ++c) dx(r, c) += y(r, c) * (dy(r, c) - dot);
    }
  });
}

template <typename T>
NodeId weighted_rmse(Graph<T>& g, NodeId pred, const Tensor<T>& target, const Tensor<T>& weights) {
  const auto& p = g.value(pred);
  if (p.rank() != 2) throw ComputeError("weighted RMSE: prediction must be [batch, k], got " + shape_to_string(p.shape()));
  require_shape(target.shape(), p.shape(), "weighted RMSE target");
  require_shape(weights.shape(), {p.dim(0)}, "weighted RMSE weights");
  const auto n = p.dim(0), k = p.dim(1);
  T wsum = 0, acc = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!(weights[r] > T(0))) throw ComputeError("weighted RMSE: weights must be > 0");
    T se = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const T d = p(r, c) - target(r, c);
      se += d * d;
    }
    acc += weights[r] * se / static_cast<T>(k);
    wsum += weights[r];
  }
  const T loss = std::sqrt(acc / wsum);
  return g.record(Tensor<T>({1}, {loss}), {pred},
                  [pred, target, weights, loss, wsum](Graph<T>& g, NodeId self) {
                    if (loss == T(0)) return;  // subgradient 0 at the minimum
                    const T up = g.grad_buffer(self)[0];
                    const auto& p = g.value(pred);
                    auto& dp = g.grad_buffer(pred);
                    const auto n = p.dim(0), k = p.dim(1);
                    const T scale = up / (static_cast<T>(k) * wsum * loss);
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t c = 0; c < k; ++c)
                        dp(r, c) += scale * weights[r] * (p(r, c) - target(r, c));
                  });
}

template <typename T>
NodeId mean_square(Graph<T>& g, NodeId x) {
  const auto& v = g.value(x);
  T acc = 0;
  for (auto e : v.data()) acc += e * e;
  return g.record(Tensor<T>({1}, {acc / static_cast<T>(v.size())}), {x},
                  [x](Graph<T>& g, NodeId self) {
                    const T up = g.grad_buffer(self)[0];
                    const auto& v = g.value(x);
                    auto& dx = g.grad_buffer(x);
                    const T scale = T(2) * up / static_cast<T>(v.size());
                    for (std::size_t i = 0; i < v.size(); ++i) dx[i] += scale * v[i];
                  });
}

template <typename T>
NodeId dot(Graph<T>& g, NodeId x, const Tensor<T>& coeffs) {
  const auto& v = g.value(x);
  require_shape(coeffs.shape(), v.shape(), "dot coefficients");
  T acc = 0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += coeffs[i] * v[i];
  return g.record(Tensor<T>({1}, {acc}), {x}, [x, coeffs](Graph<T>& g, NodeId self) {
    const T up = g.grad_buffer(self)[0];
    auto& dx = g.grad_buffer(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += up * coeffs[i];
  });
}

template <typename T>
NodeId conv3x3(Graph<T>& g, NodeId x, NodeId weight, NodeId bias) {
  auto y = kernels::conv3x3(g.value(x), g.value(weight), g.value(bias));
  return g.record(std::move(y), {x, weight, bias}, [x, weight, bias](Graph<T>& g, NodeId self) {
    kernels::conv3x3_backward(g.value(x), g.value(weight), g.grad_buffer(self),
                              g.requires_grad(x) ? &g.grad_buffer(x) : nullptr,
                              g.requires_grad(weight) ? &g.grad_buffer(weight) : nullptr,
                              g.requires_grad(bias) ? &g.grad_buffer(bias) : nullptr);
  });
}

template <typename T>
NodeId max_pool2(Graph<T>& g, NodeId x) {
  std::vector<std::size_t> argmax;
  auto y = kernels::max_pool2(g.value(x), &argmax);
  return g.record(std::move(y), {x}, [x, argmax = std::move(argmax)](Graph<T>& g, NodeId self) {
    const auto& dy = g.grad_buffer(self);
    auto& dx = g.grad_buffer(x);
    for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += dy[i];
  });
}

template <typename T>
NodeId flatten(Graph<T>& g, NodeId x) {
  const auto& v = g.value(x);
  const auto batch = v.dim(0);
  auto y = v.reshaped({batch, v.size() / batch});
  return g.record(std::move(y), {x}, [x](Graph<T>& g, NodeId self) {
    const auto& dy = g.grad_buffer(self);
    auto& dx = g.grad_buffer(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
  });
}

#define BIOMASS_INSTANTIATE_OPS(T)                                                               \
  template NodeId dense(Graph<T>&, NodeId, NodeId, NodeId);                                     \
  template NodeId relu(Graph<T>&, NodeId);                                                      \
  template NodeId batch_norm_train(Graph<T>&, NodeId, NodeId, NodeId, T, BatchStats<T>*);       \
  template NodeId batch_norm_fixed(Graph<T>&, NodeId, NodeId, NodeId, const Tensor<T>&,         \
                                   const Tensor<T>&, T);                                        \
  template NodeId softmax(Graph<T>&, NodeId);                                                   \
  template NodeId weighted_rmse(Graph<T>&, NodeId, const Tensor<T>&, const Tensor<T>&);         \
  template NodeId mean_square(Graph<T>&, NodeId);                                               \
  template NodeId dot(Graph<T>&, NodeId, const Tensor<T>&);                                     \
  template NodeId conv3x3(Graph<T>&, NodeId, NodeId, NodeId);                                   \
  template NodeId max_pool2(Graph<T>&, NodeId);                                                 \
  template NodeId flatten(Graph<T>&, NodeId);

BIOMASS_INSTANTIATE_OPS(float)
BIOMASS_INSTANTIATE_OPS(double)

}  // namespace ops

template class Graph<float>;
template class Graph<double>;

}  // namespace biomass
