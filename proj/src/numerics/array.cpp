#include "fs3d/numerics/array.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "fs3d/errors.hpp"

namespace fs3d::numerics {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string format_shape(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Array::Array(Shape shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != element_count(shape_)) {
    throw StructuralError("array of shape " + format_shape(shape_) + " given " +
                          std::to_string(values_.size()) + " values");
  }
}

Array Array::scalar(double value) { return Array(Shape{}, std::vector<double>{value}); }

Array Array::vector(std::vector<double> values) {
  Shape shape{values.size()};
  return Array(std::move(shape), std::move(values));
}

std::size_t Array::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw StructuralError("axis " + std::to_string(axis) + " out of range for " +
                          format_shape(shape_));
  }
  return shape_[axis];
}

double Array::item() const {
  if (values_.size() != 1) {
    throw ContractError("item() on array of shape " + format_shape(shape_));
  }
  return values_[0];
}

Array Array::reshaped(Shape shape) const {
  if (element_count(shape) != values_.size()) {
    throw StructuralError("cannot reshape " + format_shape(shape_) + " to " + format_shape(shape));
  }
  return Array(std::move(shape), values_);
}

bool Array::all_finite() const noexcept {
  // v * 0 is 0 for finite v and NaN otherwise, so the sum is NaN iff one entry is not finite.
  double probe = 0.0;
  for (double v : values_) probe += v * 0.0;
  return probe == 0.0;
}

}  // namespace fs3d::numerics
