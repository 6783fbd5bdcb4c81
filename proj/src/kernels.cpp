#include "biomass/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace biomass::kernels {

template <typename T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(0) ||
      b.dim(0) != w.dim(1)) {
    throw ComputeError("dense: shape mismatch x" + shape_to_string(x.shape()) + " W" +
                       shape_to_string(w.shape()) + " b" + shape_to_string(b.shape()));
  }
  const auto batch = x.dim(0), in = x.dim(1), out = w.dim(1);
  Tensor<T> y({batch, out});
  for (std::size_t r = 0; r < batch; ++r) {
    T* yr = y.ptr() + r * out;
    std::copy(b.ptr(), b.ptr() + out, yr);
    const T* xr = x.ptr() + r * in;
    for (std::size_t k = 0; k < in; ++k) {
      const T xv = xr[k];
      if (xv == T(0)) continue;
      const T* wk = w.ptr() + k * out;
      for (std::size_t c = 0; c < out; ++c) yr[c] += xv * wk[c];
    }
  }
  return y;
}

template <typename T>
void affine_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx,
                     Tensor<T>* dw, Tensor<T>* db) {
  const auto batch = x.dim(0), in = x.dim(1), out = w.dim(1);
  for (std::size_t r = 0; r < batch; ++r) {
    const T* dyr = dy.ptr() + r * out;
    const T* xr = x.ptr() + r * in;
    if (dx) {
      T* dxr = dx->ptr() + r * in;
      for (std::size_t k = 0; k < in; ++k) {
        const T* wk = w.ptr() + k * out;
        T acc = 0;
        for (std::size_t c = 0; c < out; ++c) acc += dyr[c] * wk[c];
        dxr[k] += acc;
      }
    }
    if (dw) {
      for (std::size_t k = 0; k < in; ++k) {
        const T xv = xr[k];
        if (xv == T(0)) continue;
        T* dwk = dw->ptr() + k * out;
        for (std::size_t c = 0; c < out; ++c) dwk[c] += xv * dyr[c];
      }
    }
    if (db) {
      for (std::size_t c = 0; c < out; ++c) (*db)[c] += dyr[c];
    }
  }
}

namespace {

template <typename T>
void check_conv(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 4 || weight.rank() != 4 || bias.rank() != 1 || weight.dim(2) != 3 ||
      weight.dim(3) != 3 || weight.dim(1) != x.dim(1) || bias.dim(0) != weight.dim(0)) {
    throw ComputeError("conv3x3: shape mismatch x" + shape_to_string(x.shape()) + " W" +
                       shape_to_string(weight.shape()) + " b" + shape_to_string(bias.shape()));
  }
}

// Output columns [lo, hi) for which x + dx stays inside [0, width).
inline void valid_range(std::ptrdiff_t offset, std::size_t width, std::size_t& lo, std::size_t& hi) {
  lo = offset < 0 ? static_cast<std::size_t>(-offset) : 0;
  hi = offset > 0 ? width - static_cast<std::size_t>(offset) : width;
}

}  // namespace

template <typename T>
Tensor<T> conv3x3(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  check_conv(x, weight, bias);
  const auto batch = x.dim(0), in = x.dim(1), h = x.dim(2), w = x.dim(3), out = weight.dim(0);
  const auto plane = h * w;
  Tensor<T> y({batch, out, h, w});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < out; ++o) {
      T* yp = y.ptr() + (n * out + o) * plane;
      std::fill(yp, yp + plane, bias[o]);
      for (std::size_t c = 0; c < in; ++c) {
        const T* xp = x.ptr() + (n * in + c) * plane;
        const T* wk = weight.ptr() + (o * in + c) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          std::size_t ylo, yhi;
          valid_range(ky - 1, h, ylo, yhi);
          for (int kx = 0; kx < 3; ++kx) {
            const T wv = wk[ky * 3 + kx];
            std::size_t xlo, xhi;
            valid_range(kx - 1, w, xlo, xhi);
            const std::ptrdiff_t off = (ky - 1) * static_cast<std::ptrdiff_t>(w) + (kx - 1);
            for (std::size_t r = ylo; r < yhi; ++r) {
              T* yr = yp + r * w;
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(r * w) + off;
              for (std::size_t col = xlo; col < xhi; ++col)
                yr[col] += wv * xp[src + static_cast<std::ptrdiff_t>(col)];
            }
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
void conv3x3_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy,
                      Tensor<T>* dx, Tensor<T>* dweight, Tensor<T>* dbias) {
  const auto batch = x.dim(0), in = x.dim(1), h = x.dim(2), w = x.dim(3), out = weight.dim(0);
  const auto plane = h * w;
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < out; ++o) {
      const T* dyp = dy.ptr() + (n * out + o) * plane;
      if (dbias) {
        T acc = 0;
        for (std::size_t i = 0; i < plane; ++i) acc += dyp[i];
        (*dbias)[o] += acc;
      }
      for (std::size_t c = 0; c < in; ++c) {
        const T* xp = x.ptr() + (n * in + c) * plane;
        const T* wk = weight.ptr() + (o * in + c) * 9;
        T* dxp = dx ? dx->ptr() + (n * in + c) * plane : nullptr;
        T* dwk = dweight ? dweight->ptr() + (o * in + c) * 9 : nullptr;
        for (int ky = 0; ky < 3; ++ky) {
          std::size_t ylo, yhi;
          valid_range(ky - 1, h, ylo, yhi);
          for (int kx = 0; kx < 3; ++kx) {
            std::size_t xlo, xhi;
            valid_range(kx - 1, w, xlo, xhi);
            const T wv = wk[ky * 3 + kx];
            T acc = 0;
            const std::ptrdiff_t off = (ky - 1) * static_cast<std::ptrdiff_t>(w) + (kx - 1);
            for (std::size_t r = ylo; r < yhi; ++r) {
              const T* dyr = dyp + r * w;
              const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(r * w) + off;
              if (dxp) {
                for (std::size_t col = xlo; col < xhi; ++col)
                  dxp[src + static_cast<std::ptrdiff_t>(col)] += wv * dyr[col];
              }
              if (dwk) {
                for (std::size_t col = xlo; col < xhi; ++col)
                  acc += dyr[col] * xp[src + static_cast<std::ptrdiff_t>(col)];
              }
            }
            if (dwk) dwk[ky * 3 + kx] += acc;
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> max_pool2(const Tensor<T>& x, std::vector<std::size_t>* argmax) {
  if (x.rank() != 4 || x.dim(2) < 2 || x.dim(3) < 2) {
    throw ComputeError("max_pool2: needs [batch, channels, h>=2, w>=2], got " +
                       shape_to_string(x.shape()));
  }
  const auto batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto oh = h / 2, ow = w / 2;
  Tensor<T> y({batch, ch, oh, ow});
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t out = 0;
  for (std::size_t p = 0; p < batch * ch; ++p) {
    const std::size_t base = p * h * w;
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c, ++out) {
        std::size_t best = base + 2 * r * w + 2 * c;
        for (std::size_t cand : {best + 1, best + w, best + w + 1}) {
          if (x[cand] > x[best]) best = cand;
        }
        y[out] = x[best];
        if (argmax) (*argmax)[out] = best;
      }
    }
  }
  return y;
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (auto& v : x.data()) v = v > T(0) ? v : T(0);
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  if (x.rank() != 2) throw ComputeError("softmax: expected rank-2 input, got " + shape_to_string(x.shape()));
  const auto rows = x.dim(0), cols = x.dim(1);
  Tensor<T> y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.ptr() + r * cols;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (!std::isfinite(xr[c])) throw ComputeError("softmax: non-finite input");
      mx = std::max(mx, xr[c]);
    }
    T* yr = y.ptr() + r * cols;
    T sum = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      sum += yr[c];
    }
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= sum;
  }
  return y;
}

#define BIOMASS_INSTANTIATE(T)                                                                  \
  template Tensor<T> affine(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);            \
  template void affine_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                Tensor<T>*, Tensor<T>*, Tensor<T>*);                           \
  template Tensor<T> conv3x3(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template void conv3x3_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                 Tensor<T>*, Tensor<T>*, Tensor<T>*);                          \
  template Tensor<T> max_pool2(const Tensor<T>&, std::vector<std::size_t>*);                   \
  template void relu_inplace(Tensor<T>&);                                                      \
  template Tensor<T> softmax_rows(const Tensor<T>&);

BIOMASS_INSTANTIATE(float)
BIOMASS_INSTANTIATE(double)

}  // namespace biomass::kernels
