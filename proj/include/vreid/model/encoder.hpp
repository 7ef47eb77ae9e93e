#pragma once

#include <memory>
#include <string>

#include "vreid/nn/layers.hpp"

namespace vreid::model {

struct FrameEncoderSpec {
  std::string name = "tiny";  // tiny | residual50 | residual50-ibn
  int embed_dim = 64;         // configurable for tiny; 2048 for the 50-layer variants
  int last_stride = 1;
  std::string pretrained;     // optional checkpoint path for the encoder weights

  void validate() const;
};

/// Frame-level feature extractor: (N, 3, H, W) -> (N, D, h, w) feature map.
class FrameEncoder {
 public:
  virtual ~FrameEncoder() = default;
  virtual Tensor forward(const Tensor& frames, bool train) = 0;
  virtual Tensor backward(const Tensor& dmap) = 0;
  virtual int embed_dim() const = 0;
  virtual void collect_params(const std::string& prefix, nn::NamedParams& out) = 0;
  virtual void collect_buffers(const std::string& prefix, nn::NamedBuffers& out) = 0;
};

std::unique_ptr<FrameEncoder> make_encoder(const FrameEncoderSpec& spec, RandomSource& rng);

}  // namespace vreid::model
