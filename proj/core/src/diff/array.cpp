#include "metarl/diff/array.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace metarl::diff {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Array::Array(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw std::invalid_argument("Array: shape " + shape_string(shape_) + " does not match " +
                                std::to_string(data_.size()) + " values");
  }
}

Array Array::vector(std::initializer_list<double> values) {
  return Array(Shape{values.size()}, std::vector<double>(values));
}

Array Array::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Array(Shape{n}, std::move(values));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Array(Shape{rows, cols}, std::move(values));
}

std::size_t Array::rows() const {
  if (shape_.size() == 2) return shape_[0];
  return 1;
}

std::size_t Array::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  return 1;
}

double Array::item() const {
  if (data_.size() != 1) {
    throw std::invalid_argument("Array::item: array of shape " + shape_string(shape_) + " is not a scalar");
  }
  return data_[0];
}

bool Array::all_finite() const {
  // Exponent field all ones means inf or nan; branch-free so it vectorizes.
  constexpr std::uint64_t kExp = 0x7ff0000000000000ull;
  std::uint64_t bad = 0;
  for (double v : data_) bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(v) & kExp) == kExp);
  return bad == 0;
}

double Array::l2_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

Array Array::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw std::invalid_argument("reshape: cannot view " + shape_string(shape_) + " as " + shape_string(shape));
  }
  return Array(std::move(shape), data_);
}

}  // namespace metarl::diff
