#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cuneiform/error.hpp"

namespace cuneiform::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape);

// Dense row-major array of 1-4 dimensions.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    check_shape();
    data_.assign(element_count(shape_), fill);
  }

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != element_count(shape_)) {
      throw StructuralError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                            to_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  // Same data, new extents with an equal element count.
  BasicTensor reshaped(Shape shape) const& { return BasicTensor(std::move(shape), data_); }
  BasicTensor reshaped(Shape shape) && { return BasicTensor(std::move(shape), std::move(data_)); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  void check_shape() const {
    if (shape_.empty() || shape_.size() > 4) throw StructuralError("tensor rank must be 1-4, got shape " + to_string(shape_));
    for (auto e : shape_) {
      if (e == 0) throw StructuralError("tensor extents must be >= 1, got shape " + to_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

}  // namespace cuneiform::nn
