#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "vreid/core/random.hpp"
#include "vreid/core/tensor.hpp"

namespace vreid::nn {

struct Param {
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void reset_grad() {
    if (!grad.same_shape(value)) grad = Tensor(value.shape());
    grad.zero();
  }
};

using NamedParams = std::vector<std::pair<std::string, Param*>>;
using NamedBuffers = std::vector<std::pair<std::string, Tensor*>>;

/// Kaiming-normal fill for weights feeding a ReLU: std = sqrt(2 / fan_in).
void kaiming_normal(Tensor& t, int fan_in, RandomSource& rng);

/// Stateful layer with cached activations for the backward pass.
/// forward(train=true) must precede backward; eval-mode forwards cache nothing.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(const std::string& prefix, NamedParams& out) { (void)prefix, (void)out; }
  virtual void collect_buffers(const std::string& prefix, NamedBuffers& out) { (void)prefix, (void)out; }
};

/// 2D convolution, NCHW, square-free kernel, zero padding.
class Conv2d : public Layer {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, bool with_bias, RandomSource& rng);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;

  int out_height(int h) const { return (h + 2 * pad_ - kernel_) / stride_ + 1; }
  int out_width(int w) const { return (w + 2 * pad_ - kernel_) / stride_ + 1; }

  Param weight;  // (out_ch, in_ch, k, k)
  Param bias;    // (out_ch), empty when bias-free

 private:
  int in_ch_, out_ch_, kernel_, stride_, pad_;
  bool has_bias_;
  Tensor cached_x_;
};

/// Batch normalization over (N, C, H, W) or (N, C); per-channel statistics.
class BatchNorm : public Layer {
 public:
  explicit BatchNorm(int channels, Scalar eps = 1e-5, Scalar momentum = 0.1);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;
  void collect_buffers(const std::string& prefix, NamedBuffers& out) override;

  Param gamma, beta;
  Tensor running_mean, running_var;

 private:
  int channels_;
  Scalar eps_, momentum_;
  bool trained_mode_ = false;
  Tensor cached_x_, cached_xhat_;
  std::vector<Scalar> mean_, inv_std_;
  std::vector<int> cached_shape_;
};

/// Instance normalization over (N, C, H, W): per-sample per-channel statistics,
/// affine parameters shared across samples. No running statistics.
class InstanceNorm2d : public Layer {
 public:
  explicit InstanceNorm2d(int channels, Scalar eps = 1e-5);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;

  Param gamma, beta;

 private:
  int channels_;
  Scalar eps_;
  Tensor cached_xhat_;
  std::vector<Scalar> inv_std_;
};

/// IBN block: instance norm on the first half of the channels, batch norm on
/// the rest. Used in the early residual stages of the IBN-a encoder variant.
class IbnNorm : public Layer {
 public:
  explicit IbnNorm(int channels);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;
  void collect_buffers(const std::string& prefix, NamedBuffers& out) override;

 private:
  int channels_, half_;
  InstanceNorm2d in_;
  BatchNorm bn_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor mask_;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(int kernel, int stride, int pad = 0);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int kernel_, stride_, pad_;
  std::vector<int> in_shape_;
  std::vector<std::int64_t> argmax_;
};

/// (N, C, H, W) -> (N, C) spatial mean.
class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<int> in_shape_;
};

class Linear : public Layer {
 public:
  Linear(int in_dim, int out_dim, bool with_bias, RandomSource& rng);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;

  void reinit(RandomSource& rng);

  Param weight;  // (out_dim, in_dim)
  Param bias;    // (out_dim), empty when bias-free

 private:
  int in_dim_, out_dim_;
  bool has_bias_;
  Tensor cached_x_;
};

/// 1D convolution over (N, C, T), stride 1. Padding is zero-filled or
/// replicates the sequence edges; replication keeps boundary frames on the
/// same footing as interior ones (a length-T constant sequence maps to a
/// constant output).
class Conv1d : public Layer {
 public:
  enum class Pad { zero, replicate };

  Conv1d(int in_ch, int out_ch, int kernel, int pad, bool with_bias, RandomSource& rng,
         Pad pad_mode = Pad::zero);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;

  Param weight;  // (out_ch, in_ch, k)
  Param bias;    // (out_ch)

 private:
  int clamp_index(int it, int t) const;

  int in_ch_, out_ch_, kernel_, pad_;
  bool has_bias_;
  Pad pad_mode_;
  Tensor cached_x_;
};

/// Ordered layer pipeline; backward runs in reverse.
class Sequential : public Layer {
 public:
  Sequential() = default;

  void add(std::string name, std::unique_ptr<Layer> layer);

  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;
  void collect_buffers(const std::string& prefix, NamedBuffers& out) override;

  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Layer>>> layers_;
};

/// Row-wise softmax over the last axis of a (N, T) tensor.
Tensor softmax_rows(const Tensor& logits);

/// Backward of softmax_rows: given dL/dy and y = softmax(x), returns dL/dx.
Tensor softmax_rows_backward(const Tensor& dy, const Tensor& y);

}  // namespace vreid::nn
