#include "sos/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sos {

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 1) throw std::invalid_argument("tensor dims must be positive");
    n *= d;
  }
  data.assign(size_t(n), 0.0f);
}

int64_t Tensor::numel() const {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

bool all_finite(const Tensor& t) {
  for (float v : t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace sos
