#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fs3d::numerics {

using Shape = std::vector<std::size_t>;

/// Product of extents; the empty shape denotes a scalar and counts as one element.
std::size_t element_count(const Shape& shape);
std::string format_shape(const Shape& shape);

/// Dense row-major array of 64-bit reals.
class Array {
 public:
  Array() = default;
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> values);

  static Array scalar(double value);
  static Array vector(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  double& operator[](std::size_t index) { return values_[index]; }
  double operator[](std::size_t index) const { return values_[index]; }

  /// Value of a one-element array.
  double item() const;

  Array reshaped(Shape shape) const;
  bool all_finite() const noexcept;

  friend bool operator==(const Array&, const Array&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

}  // namespace fs3d::numerics
