#include "vreid/model/encoder.hpp"

#include <vector>

namespace vreid::model {

using nn::BatchNorm;
using nn::Conv2d;
using nn::IbnNorm;
using nn::Layer;
using nn::MaxPool2d;
using nn::NamedBuffers;
using nn::NamedParams;
using nn::ReLU;
using nn::Sequential;

void FrameEncoderSpec::validate() const {
  if (name != "tiny" && name != "residual50" && name != "residual50-ibn")
    throw ValidationError(cat("unknown encoder '", name, "' (expected tiny, residual50 or residual50-ibn)"));
  if (embed_dim <= 0) throw ValidationError(cat("embed_dim must be positive, got ", embed_dim));
  if (last_stride != 1 && last_stride != 2)
    throw ValidationError(cat("last_stride must be 1 or 2, got ", last_stride));
  if (name != "tiny" && embed_dim != 2048)
    throw ValidationError(cat("the 50-layer encoders produce embed_dim 2048, got ", embed_dim));
}

// ---------------------------------------------------------------------------
// Tiny encoder: three conv blocks for desk-scale tests. The final block's
// convolution carries last_stride so the stride-1 feature map is exactly
// twice the stride-2 one.
// ---------------------------------------------------------------------------

class TinyEncoder : public FrameEncoder {
 public:
  TinyEncoder(int embed_dim, int last_stride, RandomSource& rng) : embed_dim_(embed_dim) {
    auto block = [&](const char* name, int cin, int cout, int stride, bool pool) {
      net_.add(cat(name, ".conv"), std::make_unique<Conv2d>(cin, cout, 3, stride, 1, false, rng));
      net_.add(cat(name, ".bn"), std::make_unique<BatchNorm>(cout));
      net_.add(cat(name, ".relu"), std::make_unique<ReLU>());
      if (pool) net_.add(cat(name, ".pool"), std::make_unique<MaxPool2d>(2, 2));
    };
    block("block1", 3, 16, 1, true);
    block("block2", 16, 32, 1, true);
    block("block3", 32, embed_dim, last_stride, false);
  }

  Tensor forward(const Tensor& frames, bool train) override { return net_.forward(frames, train); }
  Tensor backward(const Tensor& dmap) override { return net_.backward(dmap); }
  int embed_dim() const override { return embed_dim_; }
  void collect_params(const std::string& prefix, NamedParams& out) override { net_.collect_params(prefix, out); }
  void collect_buffers(const std::string& prefix, NamedBuffers& out) override { net_.collect_buffers(prefix, out); }

 private:
  int embed_dim_;
  Sequential net_;
};

// ---------------------------------------------------------------------------
// 50-layer residual encoder with optional instance-batch normalization on the
// first norm of each block in the early stages (the IBN-a recipe).
// ---------------------------------------------------------------------------

class Bottleneck : public Layer {
 public:
  Bottleneck(int in_ch, int mid_ch, int out_ch, int stride, bool ibn, RandomSource& rng)
      : conv1_(in_ch, mid_ch, 1, 1, 0, false, rng),
        conv2_(mid_ch, mid_ch, 3, stride, 1, false, rng),
        bn2_(mid_ch),
        conv3_(mid_ch, out_ch, 1, 1, 0, false, rng),
        bn3_(out_ch),
        has_downsample_(stride != 1 || in_ch != out_ch) {
    if (ibn)
      norm1_ = std::make_unique<IbnNorm>(mid_ch);
    else
      norm1_ = std::make_unique<BatchNorm>(mid_ch);
    if (has_downsample_) {
      down_conv_ = std::make_unique<Conv2d>(in_ch, out_ch, 1, stride, 0, false, rng);
      down_bn_ = std::make_unique<BatchNorm>(out_ch);
    }
  }

  Tensor forward(const Tensor& x, bool train) override {
    Tensor main = relu1_.forward(norm1_->forward(conv1_.forward(x, train), train), train);
    main = relu2_.forward(bn2_.forward(conv2_.forward(main, train), train), train);
    main = bn3_.forward(conv3_.forward(main, train), train);
    Tensor shortcut = has_downsample_ ? down_bn_->forward(down_conv_->forward(x, train), train) : x;
    main.add_(shortcut);
    return relu_out_.forward(main, train);
  }

  Tensor backward(const Tensor& dy) override {
    Tensor dsum = relu_out_.backward(dy);
    Tensor dmain = conv3_.backward(bn3_.backward(dsum));
    dmain = conv2_.backward(bn2_.backward(relu2_.backward(dmain)));
    Tensor dx = conv1_.backward(norm1_->backward(relu1_.backward(dmain)));
    if (has_downsample_)
      dx.add_(down_conv_->backward(down_bn_->backward(dsum)));
    else
      dx.add_(dsum);
    return dx;
  }

  void collect_params(const std::string& prefix, NamedParams& out) override {
    conv1_.collect_params(prefix + ".conv1", out);
    norm1_->collect_params(prefix + ".norm1", out);
    conv2_.collect_params(prefix + ".conv2", out);
    bn2_.collect_params(prefix + ".bn2", out);
    conv3_.collect_params(prefix + ".conv3", out);
    bn3_.collect_params(prefix + ".bn3", out);
    if (has_downsample_) {
      down_conv_->collect_params(prefix + ".down.conv", out);
      down_bn_->collect_params(prefix + ".down.bn", out);
    }
  }

  void collect_buffers(const std::string& prefix, NamedBuffers& out) override {
    norm1_->collect_buffers(prefix + ".norm1", out);
    bn2_.collect_buffers(prefix + ".bn2", out);
    bn3_.collect_buffers(prefix + ".bn3", out);
    if (has_downsample_) down_bn_->collect_buffers(prefix + ".down.bn", out);
  }

 private:
  Conv2d conv1_;
  std::unique_ptr<Layer> norm1_;  // BatchNorm or IbnNorm
  Conv2d conv2_;
  BatchNorm bn2_;
  Conv2d conv3_;
  BatchNorm bn3_;
  ReLU relu1_, relu2_, relu_out_;
  bool has_downsample_;
  std::unique_ptr<Conv2d> down_conv_;
  std::unique_ptr<BatchNorm> down_bn_;
};

class ResidualEncoder : public FrameEncoder {
 public:
  ResidualEncoder(bool ibn, int last_stride, RandomSource& rng) {
    stem_.add("conv", std::make_unique<Conv2d>(3, 64, 7, 2, 3, false, rng));
    stem_.add("bn", std::make_unique<BatchNorm>(64));
    stem_.add("relu", std::make_unique<ReLU>());
    stem_.add("pool", std::make_unique<MaxPool2d>(3, 2, 1));

    const int counts[4] = {3, 4, 6, 3};
    const int mids[4] = {64, 128, 256, 512};
    const int strides[4] = {1, 2, 2, last_stride};
    int in_ch = 64;
    for (int stage = 0; stage < 4; ++stage) {
      const int out_ch = mids[stage] * 4;
      const bool stage_ibn = ibn && stage < 3;  // IBN in the early stages only
      for (int b = 0; b < counts[stage]; ++b) {
        const int stride = b == 0 ? strides[stage] : 1;
        stages_.add(cat("stage", stage + 1, ".block", b),
                    std::make_unique<Bottleneck>(in_ch, mids[stage], out_ch, stride, stage_ibn, rng));
        in_ch = out_ch;
      }
    }
  }

  Tensor forward(const Tensor& frames, bool train) override {
    return stages_.forward(stem_.forward(frames, train), train);
  }

  Tensor backward(const Tensor& dmap) override { return stem_.backward(stages_.backward(dmap)); }

  int embed_dim() const override { return 2048; }

  void collect_params(const std::string& prefix, NamedParams& out) override {
    stem_.collect_params(prefix + ".stem", out);
    stages_.collect_params(prefix, out);
  }

  void collect_buffers(const std::string& prefix, NamedBuffers& out) override {
    stem_.collect_buffers(prefix + ".stem", out);
    stages_.collect_buffers(prefix, out);
  }

 private:
  Sequential stem_;
  Sequential stages_;
};

std::unique_ptr<FrameEncoder> make_encoder(const FrameEncoderSpec& spec, RandomSource& rng) {
  spec.validate();
  if (spec.name == "tiny") return std::make_unique<TinyEncoder>(spec.embed_dim, spec.last_stride, rng);
  return std::make_unique<ResidualEncoder>(spec.name == "residual50-ibn", spec.last_stride, rng);
}

}  // namespace vreid::model
