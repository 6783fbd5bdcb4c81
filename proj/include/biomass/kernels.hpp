#pragma once

// Forward and backward kernels shared by the differentiable ops and the
// no-gradient inference paths. Reductions run in a fixed order.

#include <cstddef>
#include <vector>

#include "biomass/tensor.hpp"

namespace biomass::kernels {

/// y = x w + b for x [batch, in], w [in, out], b [out].
template <typename T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

/// dx = dy w^T, dw += x^T dy, db += colsum(dy). Null outputs are skipped.
template <typename T>
void affine_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx,
                     Tensor<T>* dw, Tensor<T>* db);

/// 3x3 convolution, stride 1, zero padding 1. x [batch, in, h, w],
/// weight [out, in, 3, 3], bias [out].
template <typename T>
Tensor<T> conv3x3(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
void conv3x3_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy,
                      Tensor<T>* dx, Tensor<T>* dweight, Tensor<T>* dbias);

/// 2x2 max pool, stride 2, trailing odd row/column dropped. `argmax`
/// receives the flat input index of each output element.
template <typename T>
Tensor<T> max_pool2(const Tensor<T>& x, std::vector<std::size_t>* argmax = nullptr);

template <typename T>
void relu_inplace(Tensor<T>& x);

/// Row-wise softmax of a rank-2 tensor, stabilized by subtracting the row max.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);

}  // namespace biomass::kernels
