#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vreid/core/error.hpp"

namespace vreid {

using Scalar = double;

std::string shape_str(const std::vector<int>& shape);

/// Dense row-major N-d array of Scalar. Shapes are small vectors of ints;
/// data lives in one contiguous buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, Scalar v);

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const;
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator()(int i) { return data_[static_cast<std::size_t>(i)]; }
  Scalar operator()(int i) const { return data_[static_cast<std::size_t>(i)]; }
  Scalar& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  Scalar operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  Scalar& operator()(int i, int j, int k) {
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  Scalar operator()(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  Scalar& operator()(int i, int j, int k, int l) {
    return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  Scalar operator()(int i, int j, int k, int l) const {
    return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  void fill(Scalar v);
  void zero() { fill(0.0); }

  /// Same data, new shape (element counts must match).
  Tensor reshaped(std::vector<int> shape) const;

  void add_(const Tensor& other);
  void scale_(Scalar s);

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  std::vector<int> shape_;
  std::vector<Scalar> data_;
};

}  // namespace vreid
