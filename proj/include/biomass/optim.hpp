#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "biomass/autograd.hpp"

namespace biomass {

/// How the `decay` coefficient is applied.
enum class DecayMode {
  LrDecay,  ///< lr_t = lr0 / (1 + decay * step)
  L2,       ///< gradient += decay * parameter, constant lr
};

DecayMode parse_decay_mode(const std::string& text);
std::string_view to_string(DecayMode m);

template <typename T>
struct AdamState {
  double lr0 = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay = 5e-6;
  DecayMode decay_mode = DecayMode::LrDecay;
  std::uint64_t step = 0;  ///< completed updates
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;

  /// Learning rate the next update will use.
  double current_lr() const;
};

/// One bias-corrected Adam update. Moment buffers are created on the first
/// call; later calls must pass the same number of tensors with the same
/// shapes.
template <typename T>
void adam_step(AdamState<T>& state, std::span<Tensor<T>* const> params,
               std::span<const Tensor<T>* const> grads);

/// Updates the trainable parameters in `params` from their gradients.
/// Frozen parameters are skipped and stay bitwise unchanged. Parameters
/// without a gradient buffer are treated as having a zero gradient.
template <typename T>
void adam_step(AdamState<T>& state, const std::vector<Parameter<T>*>& params);

}  // namespace biomass
