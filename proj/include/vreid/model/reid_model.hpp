#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vreid/model/attention.hpp"
#include "vreid/model/encoder.hpp"
#include "vreid/nn/layers.hpp"

namespace vreid::model {

struct HeadSpec {
  int num_classes = 8;
  int attn_reduce_dim = 256;
  int temporal_kernel = 3;
  bool bnneck_before_dml = true;  // metric losses consume post-BN features

  void validate() const;
};

/// Frame encoder + temporal attention + BNNeck + bias-free classifier.
/// Training mutates parameters from a single thread; eval-mode forwards are
/// read-only.
class ReidModel {
 public:
  ReidModel(const FrameEncoderSpec& enc_spec, const HeadSpec& head_spec, std::uint64_t seed);

  struct Output {
    Tensor frame_feats;  // (B, T, D) pooled embeddings
    Tensor scores;       // (B, T) attention scores
    Tensor clip_pre;     // (B, D) pre-BN clip features
    Tensor post_bn;      // (B, D) BNNeck output
    Tensor logits;       // (B, num_classes)
  };

  /// frames: (B, T, 3, H, W).
  Output forward(const Tensor& frames, bool train);

  /// Per-frame embeddings only: (B, T, D).
  Tensor encode_frames(const Tensor& frames, bool train);

  /// Encoder feature map for one frame batch (N, 3, H, W) -> (N, D, h, w).
  Tensor encoder_map(const Tensor& frames, bool train) { return encoder_->forward(frames, train); }

  /// dlogits: gradient on classifier logits. ddml: gradient on the features
  /// consumed by the metric losses (post-BN or pre-BN per the head spec).
  /// dscores: gradient on attention scores. Empty tensors mean zero.
  void backward(const Tensor& dlogits, const Tensor& ddml, const Tensor& dscores);

  /// The feature tensor the metric losses consume, per bnneck_before_dml.
  const Tensor& dml_features(const Output& out) const {
    return head_spec_.bnneck_before_dml ? out.post_bn : out.clip_pre;
  }

  nn::NamedParams params();
  nn::NamedBuffers buffers();
  void zero_grads();

  void reinit_classifier(RandomSource& rng) { classifier_.reinit(rng); }

  void set_encoder_frozen(bool frozen);

  const FrameEncoderSpec& encoder_spec() const { return enc_spec_; }
  const HeadSpec& head_spec() const { return head_spec_; }
  int embed_dim() const { return encoder_->embed_dim(); }
  int num_classes() const { return head_spec_.num_classes; }

 private:
  FrameEncoderSpec enc_spec_;
  HeadSpec head_spec_;
  RandomSource init_rng_;  // consumed during construction only
  std::unique_ptr<FrameEncoder> encoder_;
  nn::GlobalAvgPool gap_;
  TemporalAttention attention_;
  nn::BatchNorm bnneck_;
  nn::Linear classifier_;  // bias-free
  int cached_b_ = 0, cached_t_ = 0;
};

struct ParamReport {
  struct Row {
    std::string submodule;
    std::int64_t total = 0;
    std::int64_t trainable = 0;
  };
  std::vector<Row> rows;
  std::int64_t total = 0;
  std::int64_t trainable = 0;

  std::string table() const;
};

/// Exact parameter counts, grouped by top-level submodule.
ParamReport param_report(ReidModel& model);

}  // namespace vreid::model
