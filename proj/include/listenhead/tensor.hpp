// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace listenhead {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor of doubles. Immutable once constructed; the
/// public constructor rejects non-finite values.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor vector(std::vector<double> data);
  static Tensor scalar(double value);

  // Skips the finiteness scan (checked only in debug builds). For results of
  // arithmetic on already-validated tensors.
  static Tensor unchecked(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D accessor for [rows x cols] tensors.
  double at(std::size_t row, std::size_t col) const {
    return data_[row * shape_[1] + col];
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

bool all_finite(std::span<const double> values);

}  // namespace listenhead
