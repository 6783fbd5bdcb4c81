#include "biomass/optim.hpp"

#include <cmath>

namespace biomass {

DecayMode parse_decay_mode(const std::string& text) {
  if (text == "lr_decay") return DecayMode::LrDecay;
  if (text == "l2") return DecayMode::L2;
  throw InputError("unknown decay mode '" + text + "' (expected lr_decay or l2)");
}

std::string_view to_string(DecayMode m) { return m == DecayMode::LrDecay ? "lr_decay" : "l2"; }

template <typename T>
double AdamState<T>::current_lr() const {
  if (decay_mode == DecayMode::LrDecay) return lr0 / (1.0 + decay * static_cast<double>(step));
  return lr0;
}

template <typename T>
void adam_step(AdamState<T>& state, std::span<Tensor<T>* const> params,
               std::span<const Tensor<T>* const> grads) {
  if (params.size() != grads.size()) {
    throw ComputeError("adam: " + std::to_string(params.size()) + " parameters but " +
                       std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_shape(grads[i]->shape(), params[i]->shape(), "adam gradient " + std::to_string(i));
  }
  if (state.m.empty() && state.step == 0) {
    for (const auto* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) {
    throw ComputeError("adam: parameter count changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_shape(params[i]->shape(), state.m[i].shape(), "adam parameter " + std::to_string(i));
  }

  const double lr = state.current_lr();
  const double t = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const bool l2 = state.decay_mode == DecayMode::L2;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& g = *grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      double grad = g[k];
      if (l2) grad += state.decay * static_cast<double>(p[k]);
      const double mk = state.beta1 * m[k] + (1.0 - state.beta1) * grad;
      const double vk = state.beta2 * v[k] + (1.0 - state.beta2) * grad * grad;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = lr * (mk / c1) / (std::sqrt(vk / c2) + state.eps);
      p[k] = static_cast<T>(p[k] - update);
    }
  }
  ++state.step;
}

template <typename T>
void adam_step(AdamState<T>& state, const std::vector<Parameter<T>*>& params) {
  std::vector<Tensor<T>*> values;
  std::vector<Tensor<T>> zeros;
  std::vector<const Tensor<T>*> grads;
  zeros.reserve(params.size());
  for (auto* p : params) {
    if (!p->trainable) continue;
    values.push_back(&p->value);
    if (p->grad.empty()) {
      zeros.emplace_back(p->value.shape());
      grads.push_back(&zeros.back());
    } else {
      grads.push_back(&p->grad);
    }
  }
  adam_step<T>(state, values, grads);
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(AdamState<float>&, std::span<Tensor<float>* const>,
                        std::span<const Tensor<float>* const>);
template void adam_step(AdamState<double>&, std::span<Tensor<double>* const>,
                        std::span<const Tensor<double>* const>);
template void adam_step(AdamState<float>&, const std::vector<Parameter<float>*>&);
template void adam_step(AdamState<double>&, const std::vector<Parameter<double>*>&);

}  // namespace biomass
