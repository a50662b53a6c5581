#include "cord/autodiff/tensor.hpp"

#include <cmath>

namespace cord::ad {

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

template <typename Real>
bool all_finite(std::span<const Real> values) {
  // v - v is NaN exactly for Inf and NaN; branch-free so it vectorizes
  bool ok = true;
  for (Real v : values) ok &= (v - v == Real(0));
  return ok;
}

template bool all_finite<float>(std::span<const float>);
template bool all_finite<double>(std::span<const double>);

}  // namespace cord::ad
