#pragma once

#include <vector>

#include "vreid/core/tensor.hpp"
#include "vreid/model/reid_model.hpp"
#include "vreid/nn/layers.hpp"

namespace vreid::optim {

/// Warmup + staged decay. With the default base rate the schedule reads:
///   E <= 10:        3.5e-5 * E / 10
///   10 < E <= 40:   3.5e-4
///   40 < E <= 70:   3.5e-5
///   70 < E <= 120:  3.5e-6
/// Other base rates scale every branch proportionally; extra decay epochs
/// divide by a further 10 each.
struct ScheduleConfig {
  Scalar base_lr = 0.00035;
  int warmup_epochs = 10;
  std::vector<int> decay_epochs{40, 70};
  int total_epochs = 120;

  void validate() const;
};

/// Learning rate for a 1-indexed epoch. Throws ValidationError outside
/// [1, total_epochs].
Scalar lr_at_epoch(int epoch, const ScheduleConfig& cfg);

/// Adam over a fixed parameter set. Center banks are never registered here;
/// they have their own update rule.
class Adam {
 public:
  explicit Adam(nn::NamedParams params, Scalar lr, Scalar beta1 = 0.9, Scalar beta2 = 0.999,
                Scalar eps = 1e-8);

  void set_lr(Scalar lr) { lr_ = lr; }
  Scalar lr() const { return lr_; }

  void zero_grad();
  void step();

  std::int64_t step_count() const { return t_; }
  const nn::NamedParams& params() const { return params_; }

  /// Moment state exposed for checkpointing, keyed like the parameters.
  nn::NamedBuffers state_buffers();
  void set_step_count(std::int64_t t) { t_ = t; }

 private:
  nn::NamedParams params_;
  std::vector<Tensor> m_, v_;
  Scalar lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

/// Adam over all model parameters at the epoch-1 rate of the schedule.
Adam build_optimizer(model::ReidModel& model, const ScheduleConfig& cfg);

}  // namespace vreid::optim
