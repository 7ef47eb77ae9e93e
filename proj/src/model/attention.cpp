#include "vreid/model/attention.hpp"

namespace vreid::model {

TemporalAttention::TemporalAttention(int feat_dim, int reduce_dim, int temporal_kernel, RandomSource& rng)
    : feat_dim_(feat_dim),
      reduce_dim_(reduce_dim),
      kernel_(temporal_kernel),
      reduce_(feat_dim, reduce_dim, true, rng),
      tconv_(reduce_dim, 1, temporal_kernel, temporal_kernel / 2, true, rng,
             nn::Conv1d::Pad::replicate) {
  if (reduce_dim <= 0) throw ValidationError(cat("attn_reduce_dim must be positive, got ", reduce_dim));
  if (temporal_kernel < 1 || temporal_kernel % 2 == 0)
    throw ValidationError(cat("temporal kernel must be odd and >= 1, got ", temporal_kernel));
}

TemporalAttention::Output TemporalAttention::forward(const Tensor& frame_feats, bool train) {
  if (frame_feats.ndim() != 3 || frame_feats.dim(2) != feat_dim_)
    throw ValidationError(cat("temporal attention expects (B, T, ", feat_dim_, "), got ",
                              shape_str(frame_feats.shape())));
  if (!frame_feats.all_finite()) throw NumericError("temporal attention: non-finite frame features");

  const int b = frame_feats.dim(0), t = frame_feats.dim(1);

  // Per-frame reduction: fold (B, T) into the row axis.
  Tensor flat = frame_feats.reshaped({b * t, feat_dim_});
  Tensor hidden = relu_.forward(reduce_.forward(flat, train), train);  // (B*T, R)

  // Rearrange to (B, R, T) for the temporal convolution.
  Tensor seq({b, reduce_dim_, t});
  for (int i = 0; i < b; ++i)
    for (int tt = 0; tt < t; ++tt)
      for (int r = 0; r < reduce_dim_; ++r) seq(i, r, tt) = hidden(i * t + tt, r);

  Tensor logits3 = tconv_.forward(seq, train);  // (B, 1, T)
  Tensor logits = logits3.reshaped({b, t});
  Tensor scores = nn::softmax_rows(logits);

  Output out;
  out.scores = scores;
  out.clip = Tensor({b, feat_dim_});
  const Scalar inv_t = 1.0 / static_cast<Scalar>(t);
  for (int i = 0; i < b; ++i)
    for (int tt = 0; tt < t; ++tt) {
      const Scalar a = scores(i, tt) * inv_t;
      for (int d = 0; d < feat_dim_; ++d) out.clip(i, d) += a * frame_feats(i, tt, d);
    }

  if (train) {
    cached_x_ = frame_feats;
    cached_scores_ = scores;
  }
  return out;
}

Tensor TemporalAttention::backward(const Tensor& dclip, const Tensor& dscores) {
  const int b = cached_x_.dim(0), t = cached_x_.dim(1);
  const Scalar inv_t = 1.0 / static_cast<Scalar>(t);

  // Clip feature contributes to both frame features and scores.
  Tensor dx(cached_x_.shape());
  Tensor da({b, t});
  for (int i = 0; i < b; ++i)
    for (int tt = 0; tt < t; ++tt) {
      Scalar acc = dscores.empty() ? 0.0 : dscores(i, tt);
      const Scalar a = cached_scores_(i, tt) * inv_t;
      for (int d = 0; d < feat_dim_; ++d) {
        acc += dclip(i, d) * cached_x_(i, tt, d) * inv_t;
        dx(i, tt, d) = dclip(i, d) * a;
      }
      da(i, tt) = acc;
    }

  Tensor dlogits = nn::softmax_rows_backward(da, cached_scores_);
  Tensor dseq = tconv_.backward(dlogits.reshaped({b, 1, t}));  // (B, R, T)

  Tensor dhidden({b * t, reduce_dim_});
  for (int i = 0; i < b; ++i)
    for (int tt = 0; tt < t; ++tt)
      for (int r = 0; r < reduce_dim_; ++r) dhidden(i * t + tt, r) = dseq(i, r, tt);

  Tensor dflat = reduce_.backward(relu_.backward(dhidden));  // (B*T, D)
  for (int i = 0; i < b; ++i)
    for (int tt = 0; tt < t; ++tt)
      for (int d = 0; d < feat_dim_; ++d) dx(i, tt, d) += dflat(i * t + tt, d);
  return dx;
}

void TemporalAttention::collect_params(const std::string& prefix, nn::NamedParams& out) {
  reduce_.collect_params(prefix + ".reduce", out);
  tconv_.collect_params(prefix + ".tconv", out);
}

void TemporalAttention::collect_buffers(const std::string& prefix, nn::NamedBuffers& out) {
  (void)prefix, (void)out;  // no buffers
}

}  // namespace vreid::model
