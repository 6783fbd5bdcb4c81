#include "biomass/tensor.hpp"

namespace biomass {

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void require_shape(const Shape& actual, const Shape& expected, const std::string& what) {
  if (actual != expected) {
    throw ComputeError(what + ": expected shape " + shape_to_string(expected) + ", got " +
                       shape_to_string(actual));
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace biomass
