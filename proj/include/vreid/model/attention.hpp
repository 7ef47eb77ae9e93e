#pragma once

#include "vreid/nn/layers.hpp"

namespace vreid::model {

/// Temporal attention over per-frame embeddings. A per-frame reduction
/// (D -> reduce_dim, the spatial convolution applied on the pooled 1x1 map)
/// followed by a temporal 1D convolution produces one logit per frame; scores
/// are the softmax over T and the clip feature is (1/T) sum_t a_t f_t.
class TemporalAttention {
 public:
  TemporalAttention(int feat_dim, int reduce_dim, int temporal_kernel, RandomSource& rng);

  struct Output {
    Tensor clip;    // (B, D)
    Tensor scores;  // (B, T), rows sum to 1
  };

  /// frame_feats: (B, T, D). Non-finite input raises NumericError.
  Output forward(const Tensor& frame_feats, bool train);

  /// dclip: (B, D) gradient on clip features; dscores: (B, T) gradient on the
  /// softmax scores (zero tensor when unused). Returns d frame_feats.
  Tensor backward(const Tensor& dclip, const Tensor& dscores);

  void collect_params(const std::string& prefix, nn::NamedParams& out);
  void collect_buffers(const std::string& prefix, nn::NamedBuffers& out);

  int feat_dim() const { return feat_dim_; }

 private:
  int feat_dim_, reduce_dim_, kernel_;
  nn::Linear reduce_;
  nn::ReLU relu_;
  nn::Conv1d tconv_;
  Tensor cached_x_, cached_scores_;
};

}  // namespace vreid::model
