#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "xaikit/error.hpp"

namespace xaikit {

using Shape = std::vector<std::size_t>;

// Dense N-dimensional array of doubles, row-major. The universal numeric
// carrier: images, activations, parameters and gradients are all Tensors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor of(Shape shape, std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  template <typename... Ix>
  double& operator()(Ix... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Ix>
  double operator()(Ix... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  // Same data, different shape; element count must match.
  Tensor reshaped(Shape shape) const;

  double min() const;
  double max() const;
  double sum() const;
  bool all_finite() const;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_numel(const Shape& shape);

// Throws DimensionError with a readable message when shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace xaikit
