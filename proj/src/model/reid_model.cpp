#include "vreid/model/reid_model.hpp"

#include <iomanip>
#include <map>
#include <sstream>

namespace vreid::model {

void HeadSpec::validate() const {
  if (num_classes < 2) throw ValidationError(cat("num_classes must be >= 2, got ", num_classes));
  if (attn_reduce_dim <= 0) throw ValidationError(cat("attn_reduce_dim must be positive, got ", attn_reduce_dim));
}

ReidModel::ReidModel(const FrameEncoderSpec& enc_spec, const HeadSpec& head_spec, std::uint64_t seed)
    : enc_spec_(enc_spec),
      head_spec_(head_spec),
      init_rng_(derive_seed(seed, {0x1417})),
      encoder_((enc_spec.validate(), head_spec.validate(), make_encoder(enc_spec, init_rng_))),
      attention_(encoder_->embed_dim(), head_spec.attn_reduce_dim, head_spec.temporal_kernel, init_rng_),
      bnneck_(encoder_->embed_dim()),
      classifier_(encoder_->embed_dim(), head_spec.num_classes, false, init_rng_) {}

Tensor ReidModel::encode_frames(const Tensor& frames, bool train) {
  if (frames.ndim() != 5 || frames.dim(2) != 3)
    throw ValidationError(cat("expected frames (B, T, 3, H, W), got ", shape_str(frames.shape())));
  const int b = frames.dim(0), t = frames.dim(1);
  cached_b_ = b;
  cached_t_ = t;
  Tensor flat = frames.reshaped({b * t, 3, frames.dim(3), frames.dim(4)});
  Tensor fmap = encoder_->forward(flat, train);
  Tensor pooled = gap_.forward(fmap, train);  // (B*T, D)
  return pooled.reshaped({b, t, encoder_->embed_dim()});
}

ReidModel::Output ReidModel::forward(const Tensor& frames, bool train) {
  Output out;
  out.frame_feats = encode_frames(frames, train);
  auto att = attention_.forward(out.frame_feats, train);
  out.scores = std::move(att.scores);
  out.clip_pre = std::move(att.clip);
  out.post_bn = bnneck_.forward(out.clip_pre, train);
  out.logits = classifier_.forward(out.post_bn, train);
  return out;
}

void ReidModel::backward(const Tensor& dlogits, const Tensor& ddml, const Tensor& dscores) {
  Tensor dpost = classifier_.backward(dlogits);
  if (!ddml.empty() && head_spec_.bnneck_before_dml) dpost.add_(ddml);
  Tensor dclip = bnneck_.backward(dpost);
  if (!ddml.empty() && !head_spec_.bnneck_before_dml) dclip.add_(ddml);
  Tensor dframe = attention_.backward(dclip, dscores);
  Tensor dpooled = dframe.reshaped({cached_b_ * cached_t_, encoder_->embed_dim()});
  encoder_->backward(gap_.backward(dpooled));
}

nn::NamedParams ReidModel::params() {
  nn::NamedParams out;
  encoder_->collect_params("encoder", out);
  attention_.collect_params("attention", out);
  bnneck_.collect_params("bnneck", out);
  classifier_.collect_params("classifier", out);
  return out;
}

nn::NamedBuffers ReidModel::buffers() {
  nn::NamedBuffers out;
  encoder_->collect_buffers("encoder", out);
  attention_.collect_buffers("attention", out);
  bnneck_.collect_buffers("bnneck", out);
  return out;
}

void ReidModel::zero_grads() {
  for (auto& [name, p] : params()) p->reset_grad();
}

void ReidModel::set_encoder_frozen(bool frozen) {
  nn::NamedParams enc;
  encoder_->collect_params("encoder", enc);
  for (auto& [name, p] : enc) p->trainable = !frozen;
}

ParamReport param_report(ReidModel& model) {
  ParamReport report;
  std::map<std::string, ParamReport::Row> rows;
  for (auto& [name, p] : model.params()) {
    const std::string group = name.substr(0, name.find('.'));
    auto& row = rows[group];
    row.submodule = group;
    row.total += p->value.size();
    if (p->trainable) row.trainable += p->value.size();
    report.total += p->value.size();
    if (p->trainable) report.trainable += p->value.size();
  }
  for (auto& [k, v] : rows) report.rows.push_back(v);
  return report;
}

std::string ParamReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(16) << "submodule" << std::right << std::setw(14) << "params"
     << std::setw(14) << "trainable" << "\n";
  for (const auto& row : rows)
    os << std::left << std::setw(16) << row.submodule << std::right << std::setw(14) << row.total
       << std::setw(14) << row.trainable << "\n";
  os << std::left << std::setw(16) << "total" << std::right << std::setw(14) << total
     << std::setw(14) << trainable << "\n";
  return os.str();
}

}  // namespace vreid::model
