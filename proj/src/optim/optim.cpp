#include "vreid/optim/optim.hpp"

#include <cmath>

namespace vreid::optim {

void ScheduleConfig::validate() const {
  if (base_lr <= 0.0) throw ValidationError(cat("base_lr must be positive, got ", base_lr));
  if (warmup_epochs < 1) throw ValidationError(cat("warmup_epochs must be >= 1, got ", warmup_epochs));
  if (total_epochs < 1) throw ValidationError(cat("total_epochs must be >= 1, got ", total_epochs));
  int prev = warmup_epochs;
  for (int e : decay_epochs) {
    if (e <= prev) throw ValidationError("decay_epochs must be strictly increasing and after warmup");
    prev = e;
  }
}

Scalar lr_at_epoch(int epoch, const ScheduleConfig& cfg) {
  cfg.validate();
  if (epoch < 1 || epoch > cfg.total_epochs)
    throw ValidationError(cat("epoch ", epoch, " outside [1, ", cfg.total_epochs, "]"));

  if (epoch <= cfg.warmup_epochs)
    return cfg.base_lr / 10.0 * static_cast<Scalar>(epoch) / static_cast<Scalar>(cfg.warmup_epochs);

  int stage = 0;
  for (int e : cfg.decay_epochs)
    if (epoch > e) ++stage;
  return cfg.base_lr / std::pow(10.0, static_cast<Scalar>(stage));
}

Adam::Adam(nn::NamedParams params, Scalar lr, Scalar beta1, Scalar beta2, Scalar eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& [name, p] : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
    p->reset_grad();
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) p->reset_grad();
}

void Adam::step() {
  ++t_;
  const Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(t_));
  const Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(t_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    nn::Param* p = params_[pi].second;
    if (!p->trainable) continue;
    Scalar* value = p->value.data();
    const Scalar* grad = p->grad.data();
    Scalar* m = m_[pi].data();
    Scalar* v = v_[pi].data();
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
      const Scalar mhat = m[i] / bc1;
      const Scalar vhat = v[i] / bc2;
      value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

nn::NamedBuffers Adam::state_buffers() {
  nn::NamedBuffers out;
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    out.emplace_back("optim.m." + params_[pi].first, &m_[pi]);
    out.emplace_back("optim.v." + params_[pi].first, &v_[pi]);
  }
  return out;
}

Adam build_optimizer(model::ReidModel& model, const ScheduleConfig& cfg) {
  return Adam(model.params(), lr_at_epoch(1, cfg));
}

}  // namespace vreid::optim
