#include "vreid/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace vreid::nn {

using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatRM>;
using ConstMatMap = Eigen::Map<const MatRM>;

void kaiming_normal(Tensor& t, int fan_in, RandomSource& rng) {
  if (fan_in <= 0) throw ValidationError("kaiming_normal: fan_in must be positive");
  const Scalar stddev = std::sqrt(2.0 / static_cast<Scalar>(fan_in));
  Scalar* p = t.data();
  for (std::int64_t i = 0; i < t.size(); ++i) p[i] = rng.normal(0.0, stddev);
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, bool with_bias, RandomSource& rng)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad), has_bias_(with_bias) {
  weight.value = Tensor({out_ch, in_ch, kernel, kernel});
  kaiming_normal(weight.value, in_ch * kernel * kernel, rng);
  if (has_bias_) bias.value = Tensor({out_ch});
}

static void im2col(const Tensor& x, int n, int in_ch, int h, int w, int kernel, int stride, int pad,
                   int ho, int wo, Scalar* col) {
  // col is (in_ch * k * k) x (ho * wo), row-major.
  const int cols = ho * wo;
  for (int c = 0; c < in_ch; ++c) {
    for (int ki = 0; ki < kernel; ++ki) {
      for (int kj = 0; kj < kernel; ++kj) {
        Scalar* row = col + static_cast<std::int64_t>((c * kernel + ki) * kernel + kj) * cols;
        for (int oi = 0; oi < ho; ++oi) {
          const int ii = oi * stride + ki - pad;
          for (int oj = 0; oj < wo; ++oj) {
            const int jj = oj * stride + kj - pad;
            row[oi * wo + oj] =
                (ii >= 0 && ii < h && jj >= 0 && jj < w) ? x(n, c, ii, jj) : 0.0;
          }
        }
      }
    }
  }
}

static void col2im_add(const Scalar* col, int n, int in_ch, int h, int w, int kernel, int stride,
                       int pad, int ho, int wo, Tensor& dx) {
  const int cols = ho * wo;
  for (int c = 0; c < in_ch; ++c) {
    for (int ki = 0; ki < kernel; ++ki) {
      for (int kj = 0; kj < kernel; ++kj) {
        const Scalar* row = col + static_cast<std::int64_t>((c * kernel + ki) * kernel + kj) * cols;
        for (int oi = 0; oi < ho; ++oi) {
          const int ii = oi * stride + ki - pad;
          if (ii < 0 || ii >= h) continue;
          for (int oj = 0; oj < wo; ++oj) {
            const int jj = oj * stride + kj - pad;
            if (jj < 0 || jj >= w) continue;
            dx(n, c, ii, jj) += row[oi * wo + oj];
          }
        }
      }
    }
  }
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
  if (x.ndim() != 4 || x.dim(1) != in_ch_)
    throw ValidationError(cat("Conv2d: expected (N, ", in_ch_, ", H, W), got ", shape_str(x.shape())));
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int ho = out_height(h), wo = out_width(w);
  if (ho <= 0 || wo <= 0)
    throw ValidationError(cat("Conv2d: input ", shape_str(x.shape()), " too small for kernel ", kernel_));

  Tensor y({n, out_ch_, ho, wo});
  const int krows = in_ch_ * kernel_ * kernel_;
  std::vector<Scalar> col(static_cast<std::size_t>(krows) * ho * wo);
  ConstMatMap wmat(weight.value.data(), out_ch_, krows);
  for (int i = 0; i < n; ++i) {
    im2col(x, i, in_ch_, h, w, kernel_, stride_, pad_, ho, wo, col.data());
    ConstMatMap cmat(col.data(), krows, ho * wo);
    MatMap ymat(y.data() + static_cast<std::int64_t>(i) * out_ch_ * ho * wo, out_ch_, ho * wo);
    ymat.noalias() = wmat * cmat;
    if (has_bias_) {
      for (int c = 0; c < out_ch_; ++c) ymat.row(c).array() += bias.value(c);
    }
  }
  if (train) cached_x_ = x;
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const Tensor& x = cached_x_;
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int ho = dy.dim(2), wo = dy.dim(3);
  const int krows = in_ch_ * kernel_ * kernel_;

  weight.reset_grad();
  if (has_bias_) bias.reset_grad();
  Tensor dx(x.shape());

  std::vector<Scalar> col(static_cast<std::size_t>(krows) * ho * wo);
  std::vector<Scalar> dcol(col.size());
  ConstMatMap wmat(weight.value.data(), out_ch_, krows);
  MatMap dwmat(weight.grad.data(), out_ch_, krows);
  for (int i = 0; i < n; ++i) {
    im2col(x, i, in_ch_, h, w, kernel_, stride_, pad_, ho, wo, col.data());
    ConstMatMap cmat(col.data(), krows, ho * wo);
    ConstMatMap dymat(dy.data() + static_cast<std::int64_t>(i) * out_ch_ * ho * wo, out_ch_, ho * wo);
    dwmat.noalias() += dymat * cmat.transpose();
    if (has_bias_) {
      for (int c = 0; c < out_ch_; ++c) bias.grad(c) += dymat.row(c).sum();
    }
    MatMap dcmat(dcol.data(), krows, ho * wo);
    dcmat.noalias() = wmat.transpose() * dymat;
    col2im_add(dcol.data(), i, in_ch_, h, w, kernel_, stride_, pad_, ho, wo, dx);
  }
  return dx;
}

void Conv2d::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".weight", &weight);
  if (has_bias_) out.emplace_back(prefix + ".bias", &bias);
}

// ---------------------------------------------------------------------------
// BatchNorm
// ---------------------------------------------------------------------------

BatchNorm::BatchNorm(int channels, Scalar eps, Scalar momentum)
    : channels_(channels), eps_(eps), momentum_(momentum) {
  gamma.value = Tensor::full({channels}, 1.0);
  beta.value = Tensor({channels});
  running_mean = Tensor({channels});
  running_var = Tensor::full({channels}, 1.0);
}

Tensor BatchNorm::forward(const Tensor& x, bool train) {
  if (x.ndim() != 2 && x.ndim() != 4)
    throw ValidationError(cat("BatchNorm: expected 2d or 4d input, got ", shape_str(x.shape())));
  if (x.dim(1) != channels_)
    throw ValidationError(cat("BatchNorm: expected ", channels_, " channels, got ", shape_str(x.shape())));

  cached_shape_ = x.shape();
  const int n = x.dim(0);
  const int spatial = x.ndim() == 4 ? x.dim(2) * x.dim(3) : 1;
  const std::int64_t group = static_cast<std::int64_t>(n) * spatial;
  if (train && group < 2)
    throw ValidationError(cat("BatchNorm: training needs more than 1 value per channel, got input ",
                              shape_str(x.shape())));

  Tensor y(x.shape());
  mean_.assign(static_cast<std::size_t>(channels_), 0.0);
  inv_std_.assign(static_cast<std::size_t>(channels_), 0.0);
  trained_mode_ = train;

  auto value_at = [&](const Tensor& t, int i, int c, int s) -> Scalar {
    return t.data()[(static_cast<std::int64_t>(i) * channels_ + c) * spatial + s];
  };
  auto ref_at = [&](Tensor& t, int i, int c, int s) -> Scalar& {
    return t.data()[(static_cast<std::int64_t>(i) * channels_ + c) * spatial + s];
  };

  if (train) {
    for (int c = 0; c < channels_; ++c) {
      Scalar sum = 0.0, sq = 0.0;
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < spatial; ++s) {
          Scalar v = value_at(x, i, c, s);
          sum += v;
          sq += v * v;
        }
      const Scalar mean = sum / static_cast<Scalar>(group);
      Scalar var = sq / static_cast<Scalar>(group) - mean * mean;
      if (var < 0.0) var = 0.0;
      mean_[static_cast<std::size_t>(c)] = mean;
      inv_std_[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var + eps_);

      // Running stats use the unbiased variance estimate.
      const Scalar unbiased = group > 1 ? var * static_cast<Scalar>(group) / static_cast<Scalar>(group - 1) : var;
      running_mean(c) = (1.0 - momentum_) * running_mean(c) + momentum_ * mean;
      running_var(c) = (1.0 - momentum_) * running_var(c) + momentum_ * unbiased;
    }
    cached_x_ = x;
    cached_xhat_ = Tensor(x.shape());
    for (int c = 0; c < channels_; ++c) {
      const Scalar mean = mean_[static_cast<std::size_t>(c)];
      const Scalar istd = inv_std_[static_cast<std::size_t>(c)];
      const Scalar g = gamma.value(c), b = beta.value(c);
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < spatial; ++s) {
          const Scalar xh = (value_at(x, i, c, s) - mean) * istd;
          ref_at(cached_xhat_, i, c, s) = xh;
          ref_at(y, i, c, s) = g * xh + b;
        }
    }
  } else {
    for (int c = 0; c < channels_; ++c) {
      const Scalar istd = 1.0 / std::sqrt(running_var(c) + eps_);
      const Scalar mean = running_mean(c);
      const Scalar g = gamma.value(c), b = beta.value(c);
      mean_[static_cast<std::size_t>(c)] = mean;
      inv_std_[static_cast<std::size_t>(c)] = istd;
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < spatial; ++s) ref_at(y, i, c, s) = g * (value_at(x, i, c, s) - mean) * istd + b;
    }
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& dy) {
  const int n = cached_shape_[0];
  const int spatial = cached_shape_.size() == 4 ? cached_shape_[2] * cached_shape_[3] : 1;
  const Scalar group = static_cast<Scalar>(static_cast<std::int64_t>(n) * spatial);

  gamma.reset_grad();
  beta.reset_grad();
  Tensor dx(cached_shape_);

  auto at = [&](const Tensor& t, int i, int c, int s) -> Scalar {
    return t.data()[(static_cast<std::int64_t>(i) * channels_ + c) * spatial + s];
  };
  auto ref = [&](Tensor& t, int i, int c, int s) -> Scalar& {
    return t.data()[(static_cast<std::int64_t>(i) * channels_ + c) * spatial + s];
  };

  if (!trained_mode_) {
    // Eval-mode backward: statistics are constants.
    for (int c = 0; c < channels_; ++c) {
      const Scalar k = gamma.value(c) * inv_std_[static_cast<std::size_t>(c)];
      for (int i = 0; i < n; ++i)
        for (int s = 0; s < spatial; ++s) ref(dx, i, c, s) = at(dy, i, c, s) * k;
    }
    return dx;
  }

  for (int c = 0; c < channels_; ++c) {
    const Scalar g = gamma.value(c);
    const Scalar istd = inv_std_[static_cast<std::size_t>(c)];
    Scalar sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < spatial; ++s) {
        const Scalar d = at(dy, i, c, s);
        sum_dy += d;
        sum_dy_xhat += d * at(cached_xhat_, i, c, s);
      }
    gamma.grad(c) = sum_dy_xhat;
    beta.grad(c) = sum_dy;
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < spatial; ++s) {
        const Scalar d = at(dy, i, c, s);
        const Scalar xh = at(cached_xhat_, i, c, s);
        ref(dx, i, c, s) = g * istd / group * (group * d - sum_dy - xh * sum_dy_xhat);
      }
  }
  return dx;
}

void BatchNorm::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".gamma", &gamma);
  out.emplace_back(prefix + ".beta", &beta);
}

void BatchNorm::collect_buffers(const std::string& prefix, NamedBuffers& out) {
  out.emplace_back(prefix + ".running_mean", &running_mean);
  out.emplace_back(prefix + ".running_var", &running_var);
}

// ---------------------------------------------------------------------------
// InstanceNorm2d
// ---------------------------------------------------------------------------

InstanceNorm2d::InstanceNorm2d(int channels, Scalar eps) : channels_(channels), eps_(eps) {
  gamma.value = Tensor::full({channels}, 1.0);
  beta.value = Tensor({channels});
}

Tensor InstanceNorm2d::forward(const Tensor& x, bool train) {
  (void)train;  // instance stats in both modes
  if (x.ndim() != 4 || x.dim(1) != channels_)
    throw ValidationError(cat("InstanceNorm2d: expected (N, ", channels_, ", H, W), got ", shape_str(x.shape())));
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int spatial = h * w;

  Tensor y(x.shape());
  cached_xhat_ = Tensor(x.shape());
  inv_std_.assign(static_cast<std::size_t>(n) * channels_, 0.0);

  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < channels_; ++c) {
      const Scalar* px = x.data() + (static_cast<std::int64_t>(i) * channels_ + c) * spatial;
      Scalar sum = 0.0, sq = 0.0;
      for (int s = 0; s < spatial; ++s) {
        sum += px[s];
        sq += px[s] * px[s];
      }
      const Scalar mean = sum / spatial;
      Scalar var = sq / spatial - mean * mean;
      if (var < 0.0) var = 0.0;
      const Scalar istd = 1.0 / std::sqrt(var + eps_);
      inv_std_[static_cast<std::size_t>(i) * channels_ + c] = istd;
      Scalar* pxh = cached_xhat_.data() + (static_cast<std::int64_t>(i) * channels_ + c) * spatial;
      Scalar* py = y.data() + (static_cast<std::int64_t>(i) * channels_ + c) * spatial;
      const Scalar g = gamma.value(c), b = beta.value(c);
      for (int s = 0; s < spatial; ++s) {
        pxh[s] = (px[s] - mean) * istd;
        py[s] = g * pxh[s] + b;
      }
    }
  }
  return y;
}

Tensor InstanceNorm2d::backward(const Tensor& dy) {
  const int n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
  const int spatial = h * w;
  gamma.reset_grad();
  beta.reset_grad();
  Tensor dx(dy.shape());

  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < channels_; ++c) {
      const std::int64_t base = (static_cast<std::int64_t>(i) * channels_ + c) * spatial;
      const Scalar* pdy = dy.data() + base;
      const Scalar* pxh = cached_xhat_.data() + base;
      Scalar* pdx = dx.data() + base;
      const Scalar g = gamma.value(c);
      const Scalar istd = inv_std_[static_cast<std::size_t>(i) * channels_ + c];
      Scalar sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int s = 0; s < spatial; ++s) {
        sum_dy += pdy[s];
        sum_dy_xhat += pdy[s] * pxh[s];
      }
      gamma.grad(c) += sum_dy_xhat;
      beta.grad(c) += sum_dy;
      const Scalar m = static_cast<Scalar>(spatial);
      for (int s = 0; s < spatial; ++s)
        pdx[s] = g * istd / m * (m * pdy[s] - sum_dy - pxh[s] * sum_dy_xhat);
    }
  }
  return dx;
}

void InstanceNorm2d::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".gamma", &gamma);
  out.emplace_back(prefix + ".beta", &beta);
}

// ---------------------------------------------------------------------------
// IbnNorm
// ---------------------------------------------------------------------------

IbnNorm::IbnNorm(int channels)
    : channels_(channels), half_(channels / 2), in_(channels / 2), bn_(channels - channels / 2) {
  if (channels < 2) throw ValidationError("IbnNorm: needs at least 2 channels");
}

static Tensor slice_channels(const Tensor& x, int c0, int c1) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  (void)c;
  Tensor y({n, c1 - c0, h, w});
  const int spatial = h * w;
  for (int i = 0; i < n; ++i)
    for (int cc = c0; cc < c1; ++cc)
      std::copy_n(x.data() + (static_cast<std::int64_t>(i) * x.dim(1) + cc) * spatial, spatial,
                  y.data() + (static_cast<std::int64_t>(i) * (c1 - c0) + (cc - c0)) * spatial);
  return y;
}

static void paste_channels(const Tensor& part, Tensor& whole, int c0) {
  const int n = part.dim(0), pc = part.dim(1), h = part.dim(2), w = part.dim(3);
  const int spatial = h * w;
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < pc; ++cc)
      std::copy_n(part.data() + (static_cast<std::int64_t>(i) * pc + cc) * spatial, spatial,
                  whole.data() + (static_cast<std::int64_t>(i) * whole.dim(1) + (c0 + cc)) * spatial);
}

Tensor IbnNorm::forward(const Tensor& x, bool train) {
  if (x.ndim() != 4 || x.dim(1) != channels_)
    throw ValidationError(cat("IbnNorm: expected (N, ", channels_, ", H, W), got ", shape_str(x.shape())));
  Tensor lo = in_.forward(slice_channels(x, 0, half_), train);
  Tensor hi = bn_.forward(slice_channels(x, half_, channels_), train);
  Tensor y(x.shape());
  paste_channels(lo, y, 0);
  paste_channels(hi, y, half_);
  return y;
}

Tensor IbnNorm::backward(const Tensor& dy) {
  Tensor dlo = in_.backward(slice_channels(dy, 0, half_));
  Tensor dhi = bn_.backward(slice_channels(dy, half_, channels_));
  Tensor dx(dy.shape());
  paste_channels(dlo, dx, 0);
  paste_channels(dhi, dx, half_);
  return dx;
}

void IbnNorm::collect_params(const std::string& prefix, NamedParams& out) {
  in_.collect_params(prefix + ".in", out);
  bn_.collect_params(prefix + ".bn", out);
}

void IbnNorm::collect_buffers(const std::string& prefix, NamedBuffers& out) {
  bn_.collect_buffers(prefix + ".bn", out);
}

// ---------------------------------------------------------------------------
// ReLU / MaxPool2d / GlobalAvgPool
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, bool train) {
  Tensor y(x.shape());
  if (train) mask_ = Tensor(x.shape());
  const Scalar* px = x.data();
  Scalar* py = y.data();
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const bool pos = px[i] > 0.0;
    py[i] = pos ? px[i] : 0.0;
    if (train) mask_(static_cast<int>(i)) = pos ? 1.0 : 0.0;
  }
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx(dy.shape());
  const Scalar* pd = dy.data();
  const Scalar* pm = mask_.data();
  Scalar* px = dx.data();
  for (std::int64_t i = 0; i < dy.size(); ++i) px[i] = pd[i] * pm[i];
  return dx;
}

MaxPool2d::MaxPool2d(int kernel, int stride, int pad) : kernel_(kernel), stride_(stride), pad_(pad) {}

Tensor MaxPool2d::forward(const Tensor& x, bool train) {
  if (x.ndim() != 4) throw ValidationError(cat("MaxPool2d: expected 4d input, got ", shape_str(x.shape())));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int ho = (h + 2 * pad_ - kernel_) / stride_ + 1;
  const int wo = (w + 2 * pad_ - kernel_) / stride_ + 1;
  if (ho <= 0 || wo <= 0)
    throw ValidationError(cat("MaxPool2d: input ", shape_str(x.shape()), " too small for kernel ", kernel_));

  Tensor y({n, c, ho, wo});
  in_shape_ = x.shape();
  if (train) argmax_.assign(static_cast<std::size_t>(y.size()), -1);

  std::int64_t o = 0;
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc)
      for (int oi = 0; oi < ho; ++oi)
        for (int oj = 0; oj < wo; ++oj, ++o) {
          Scalar best = -std::numeric_limits<Scalar>::infinity();
          std::int64_t best_idx = -1;
          for (int ki = 0; ki < kernel_; ++ki) {
            const int ii = oi * stride_ + ki - pad_;
            if (ii < 0 || ii >= h) continue;
            for (int kj = 0; kj < kernel_; ++kj) {
              const int jj = oj * stride_ + kj - pad_;
              if (jj < 0 || jj >= w) continue;
              const Scalar v = x(i, cc, ii, jj);
              if (v > best) {
                best = v;
                best_idx = ((static_cast<std::int64_t>(i) * c + cc) * h + ii) * w + jj;
              }
            }
          }
          y.data()[o] = best;
          if (train) argmax_[static_cast<std::size_t>(o)] = best_idx;
        }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
  Tensor dx(in_shape_);
  const Scalar* pd = dy.data();
  for (std::int64_t o = 0; o < dy.size(); ++o) {
    const std::int64_t idx = argmax_[static_cast<std::size_t>(o)];
    if (idx >= 0) dx.data()[idx] += pd[o];
  }
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool train) {
  (void)train;
  if (x.ndim() != 4) throw ValidationError(cat("GlobalAvgPool: expected 4d input, got ", shape_str(x.shape())));
  const int n = x.dim(0), c = x.dim(1), spatial = x.dim(2) * x.dim(3);
  in_shape_ = x.shape();
  Tensor y({n, c});
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc) {
      const Scalar* p = x.data() + (static_cast<std::int64_t>(i) * c + cc) * spatial;
      Scalar sum = 0.0;
      for (int s = 0; s < spatial; ++s) sum += p[s];
      y(i, cc) = sum / static_cast<Scalar>(spatial);
    }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  const int n = in_shape_[0], c = in_shape_[1], spatial = in_shape_[2] * in_shape_[3];
  Tensor dx(in_shape_);
  for (int i = 0; i < n; ++i)
    for (int cc = 0; cc < c; ++cc) {
      const Scalar g = dy(i, cc) / static_cast<Scalar>(spatial);
      Scalar* p = dx.data() + (static_cast<std::int64_t>(i) * c + cc) * spatial;
      for (int s = 0; s < spatial; ++s) p[s] = g;
    }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(int in_dim, int out_dim, bool with_bias, RandomSource& rng)
    : in_dim_(in_dim), out_dim_(out_dim), has_bias_(with_bias) {
  weight.value = Tensor({out_dim, in_dim});
  kaiming_normal(weight.value, in_dim, rng);
  if (has_bias_) bias.value = Tensor({out_dim});
}

void Linear::reinit(RandomSource& rng) {
  kaiming_normal(weight.value, in_dim_, rng);
  if (has_bias_) bias.value.zero();
}

Tensor Linear::forward(const Tensor& x, bool train) {
  if (x.ndim() != 2 || x.dim(1) != in_dim_)
    throw ValidationError(cat("Linear: expected (N, ", in_dim_, "), got ", shape_str(x.shape())));
  const int n = x.dim(0);
  Tensor y({n, out_dim_});
  ConstMatMap xm(x.data(), n, in_dim_);
  ConstMatMap wm(weight.value.data(), out_dim_, in_dim_);
  MatMap ym(y.data(), n, out_dim_);
  ym.noalias() = xm * wm.transpose();
  if (has_bias_) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < out_dim_; ++j) y(i, j) += bias.value(j);
  }
  if (train) cached_x_ = x;
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const int n = cached_x_.dim(0);
  weight.reset_grad();
  if (has_bias_) bias.reset_grad();
  Tensor dx({n, in_dim_});

  ConstMatMap xm(cached_x_.data(), n, in_dim_);
  ConstMatMap dym(dy.data(), n, out_dim_);
  ConstMatMap wm(weight.value.data(), out_dim_, in_dim_);
  MatMap dwm(weight.grad.data(), out_dim_, in_dim_);
  MatMap dxm(dx.data(), n, in_dim_);
  dwm.noalias() = dym.transpose() * xm;
  dxm.noalias() = dym * wm;
  if (has_bias_) {
    for (int j = 0; j < out_dim_; ++j) bias.grad(j) = dym.col(j).sum();
  }
  return dx;
}

void Linear::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".weight", &weight);
  if (has_bias_) out.emplace_back(prefix + ".bias", &bias);
}

// ---------------------------------------------------------------------------
// Conv1d
// ---------------------------------------------------------------------------

Conv1d::Conv1d(int in_ch, int out_ch, int kernel, int pad, bool with_bias, RandomSource& rng, Pad pad_mode)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), pad_(pad), has_bias_(with_bias), pad_mode_(pad_mode) {
  weight.value = Tensor({out_ch, in_ch, kernel});
  kaiming_normal(weight.value, in_ch * kernel, rng);
  if (has_bias_) bias.value = Tensor({out_ch});
}

int Conv1d::clamp_index(int it, int t) const {
  if (pad_mode_ == Pad::replicate) return std::clamp(it, 0, t - 1);
  return (it >= 0 && it < t) ? it : -1;
}

Tensor Conv1d::forward(const Tensor& x, bool train) {
  if (x.ndim() != 3 || x.dim(1) != in_ch_)
    throw ValidationError(cat("Conv1d: expected (N, ", in_ch_, ", T), got ", shape_str(x.shape())));
  const int n = x.dim(0), t = x.dim(2);
  const int to = t + 2 * pad_ - kernel_ + 1;
  if (to <= 0) throw ValidationError(cat("Conv1d: sequence length ", t, " too short for kernel ", kernel_));

  Tensor y({n, out_ch_, to});
  for (int i = 0; i < n; ++i)
    for (int oc = 0; oc < out_ch_; ++oc)
      for (int ot = 0; ot < to; ++ot) {
        Scalar acc = has_bias_ ? bias.value(oc) : 0.0;
        for (int ic = 0; ic < in_ch_; ++ic)
          for (int k = 0; k < kernel_; ++k) {
            const int it = clamp_index(ot + k - pad_, t);
            if (it < 0) continue;
            acc += weight.value(oc, ic, k) * x(i, ic, it);
          }
        y(i, oc, ot) = acc;
      }
  if (train) cached_x_ = x;
  return y;
}

Tensor Conv1d::backward(const Tensor& dy) {
  const Tensor& x = cached_x_;
  const int n = x.dim(0), t = x.dim(2);
  const int to = dy.dim(2);
  weight.reset_grad();
  if (has_bias_) bias.reset_grad();
  Tensor dx(x.shape());

  for (int i = 0; i < n; ++i)
    for (int oc = 0; oc < out_ch_; ++oc)
      for (int ot = 0; ot < to; ++ot) {
        const Scalar g = dy(i, oc, ot);
        if (has_bias_) bias.grad(oc) += g;
        for (int ic = 0; ic < in_ch_; ++ic)
          for (int k = 0; k < kernel_; ++k) {
            const int it = clamp_index(ot + k - pad_, t);
            if (it < 0) continue;
            weight.grad(oc, ic, k) += g * x(i, ic, it);
            dx(i, ic, it) += g * weight.value(oc, ic, k);
          }
      }
  return dx;
}

void Conv1d::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".weight", &weight);
  if (has_bias_) out.emplace_back(prefix + ".bias", &bias);
}

// ---------------------------------------------------------------------------
// Sequential
// ---------------------------------------------------------------------------

void Sequential::add(std::string name, std::unique_ptr<Layer> layer) {
  layers_.emplace_back(std::move(name), std::move(layer));
}

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor cur = x;
  for (auto& [name, layer] : layers_) cur = layer->forward(cur, train);
  return cur;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor cur = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = it->second->backward(cur);
  return cur;
}

void Sequential::collect_params(const std::string& prefix, NamedParams& out) {
  for (auto& [name, layer] : layers_) layer->collect_params(prefix + "." + name, out);
}

void Sequential::collect_buffers(const std::string& prefix, NamedBuffers& out) {
  for (auto& [name, layer] : layers_) layer->collect_buffers(prefix + "." + name, out);
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

Tensor softmax_rows(const Tensor& logits) {
  if (logits.ndim() != 2) throw ValidationError(cat("softmax_rows: expected 2d input, got ", shape_str(logits.shape())));
  const int n = logits.dim(0), t = logits.dim(1);
  Tensor y({n, t});
  for (int i = 0; i < n; ++i) {
    Scalar mx = logits(i, 0);
    for (int j = 1; j < t; ++j) mx = std::max(mx, logits(i, j));
    Scalar sum = 0.0;
    for (int j = 0; j < t; ++j) {
      const Scalar e = std::exp(logits(i, j) - mx);
      y(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < t; ++j) y(i, j) /= sum;
  }
  return y;
}

Tensor softmax_rows_backward(const Tensor& dy, const Tensor& y) {
  const int n = y.dim(0), t = y.dim(1);
  Tensor dx({n, t});
  for (int i = 0; i < n; ++i) {
    Scalar dot = 0.0;
    for (int j = 0; j < t; ++j) dot += dy(i, j) * y(i, j);
    for (int j = 0; j < t; ++j) dx(i, j) = (dy(i, j) - dot) * y(i, j);
  }
  return dx;
}

}  // namespace vreid::nn
