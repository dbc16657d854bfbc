#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sos {

// Dense row-major float tensor; shape order is [N, C, H, W] for image data.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);

  int64_t numel() const;
  int dim(int i) const { return shape[size_t(i)]; }

  float& operator[](size_t i) { return data[i]; }
  float operator[](size_t i) const { return data[i]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::string shape_string(const std::vector<int>& shape);

// True iff every element is finite.
bool all_finite(const Tensor& t);

}  // namespace sos
