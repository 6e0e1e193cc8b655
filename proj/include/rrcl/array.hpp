// SPDX-License-Identifier: Apache-2.0
//
// Dense float32 array with a row-major shape.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rrcl {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class Array {
 public:
  Array() = default;
  explicit Array(Shape shape, float fill = 0.0f);
  Array(Shape shape, std::vector<float> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  void fill(float v);
  bool all_finite() const;

  friend bool operator==(const Array&, const Array&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Throws ShapeError unless a and b have the same shape.
void require_same_shape(const Array& a, const Array& b, const char* what);
// Throws NumericError naming `what` if any element is NaN/Inf.
void require_finite(const Array& a, const char* what);

// ||a - b||^2 accumulated in double.
double squared_distance(std::span<const float> a, std::span<const float> b);
double squared_norm(std::span<const float> a);
double dot(std::span<const float> a, std::span<const float> b);

}  // namespace rrcl
