#include "vreid/core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace vreid {

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

static std::int64_t count_of(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ValidationError(cat("Tensor: negative dimension in shape ", shape_str(shape)));
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<std::size_t>(count_of(shape_)), 0.0);
}

Tensor Tensor::full(std::vector<int> shape, Scalar v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

int Tensor::dim(int i) const {
  if (i < 0 || i >= ndim()) throw ValidationError(cat("Tensor::dim: axis ", i, " out of range for ", shape_str(shape_)));
  return shape_[static_cast<std::size_t>(i)];
}

void Tensor::fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(std::vector<int> shape) const {
  if (count_of(shape) != size())
    throw ValidationError(cat("Tensor::reshaped: cannot view ", shape_str(shape_), " as ", shape_str(shape)));
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

void Tensor::add_(const Tensor& other) {
  if (!same_shape(other))
    throw ValidationError(cat("Tensor::add_: shape mismatch ", shape_str(shape_), " vs ", shape_str(other.shape_)));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void Tensor::scale_(Scalar s) {
  for (Scalar& v : data_) v *= s;
}

bool Tensor::all_finite() const {
  for (Scalar v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace vreid
