// SPDX-License-Identifier: Apache-2.0
#include "listenhead/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "listenhead/error.hpp"

namespace listenhead {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool all_finite(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size())
    throw ContractError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_string(shape_));
  if (!all_finite(data_))
    throw NumericError("tensor constructed with non-finite value");
}

Tensor Tensor::unchecked(Shape shape, std::vector<double> data) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
#ifndef NDEBUG
  if (shape_size(t.shape_) != t.data_.size())
    throw ContractError("tensor data length does not match shape " +
                        shape_string(t.shape_));
  if (!all_finite(t.data_))
    throw NumericError("operation produced a non-finite value");
#endif
  return t;
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::vector(std::vector<double> data) {
  const std::size_t n = data.size();
  return Tensor({n}, std::move(data));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size())
    throw ContractError("axis " + std::to_string(axis) + " out of range for " +
                        shape_string(shape_));
  return shape_[axis];
}

}  // namespace listenhead
