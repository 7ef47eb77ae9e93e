#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vreid/core/random.hpp"
#include "vreid/core/tensor.hpp"

namespace testutil {

using vreid::RandomSource;
using vreid::Scalar;
using vreid::Tensor;

inline Tensor random_tensor(std::vector<int> shape, RandomSource& rng, Scalar stddev = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, stddev);
  return t;
}

/// Central finite differences of a scalar function of one tensor.
inline Tensor finite_diff(const std::function<Scalar(const Tensor&)>& f, Tensor x, Scalar h = 1e-5) {
  Tensor grad(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const Scalar keep = x.data()[i];
    x.data()[i] = keep + h;
    const Scalar up = f(x);
    x.data()[i] = keep - h;
    const Scalar down = f(x);
    x.data()[i] = keep;
    grad.data()[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline Scalar max_rel_error(const Tensor& a, const Tensor& b) {
  Scalar worst = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const Scalar denom = std::max({std::abs(a.data()[i]), std::abs(b.data()[i]), Scalar(1e-4)});
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) / denom);
  }
  return worst;
}

inline Scalar max_abs_diff(const Tensor& a, const Tensor& b) {
  Scalar worst = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

/// Unique scratch directory under the build tree, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    base_ = std::filesystem::temp_directory_path() /
            ("vreid_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(base_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(base_, ec);
  }
  const std::filesystem::path& path() const { return base_; }

 private:
  std::filesystem::path base_;
};

}  // namespace testutil
