#pragma once

#include <vector>

#include "vreid/core/tensor.hpp"

namespace vreid::loss {

/// Ranked-list-loss knobs. Negatives are pushed beyond alpha, positives
/// pulled within alpha - margin. `temperature` sharpens the negative weights
/// w_ij = exp(temperature * (alpha - d_ij)); 0 means uniform weighting.
struct RllConfig {
  Scalar alpha = 2.0;
  Scalar margin = 1.3;
  Scalar lambda = 1.0;
  Scalar temperature = 0.0;

  void validate() const;
};

struct LossWeights {
  Scalar beta = 0.00005;   // center-loss weight
  Scalar epsilon = 0.1;    // label smoothing
  bool negate_erase = false;  // flip the sign of the erasing-attention term

  void validate() const;
};

/// Per-class feature centers, updated by a dedicated SGD rule rather than the
/// main optimizer. Single writer (the training loop).
struct CenterBank {
  Tensor centers;  // (num_classes, D)
  Scalar learning_rate = 0.5;

  CenterBank() = default;
  CenterBank(int num_classes, int dim, Scalar lr = 0.5) : centers({num_classes, dim}), learning_rate(lr) {}

  int num_classes() const { return centers.empty() ? 0 : centers.dim(0); }
  int dim() const { return centers.empty() ? 0 : centers.dim(1); }
};

struct LossGrad {
  Scalar value = 0.0;
  Tensor grad;  // d value / d input (logits, features or scores)
};

/// Cross entropy against label-smoothed targets, averaged over the batch:
/// q_y = 1 - (N-1)/N * eps, q_other = eps / N.
LossGrad id_loss(const Tensor& logits, const std::vector<int>& labels, Scalar epsilon);

/// Mining sets per anchor, exposed for diagnostics and oracle checks.
struct RllMining {
  std::vector<std::vector<int>> positives;  // non-trivial: same class, d > alpha - m
  std::vector<std::vector<int>> negatives;  // non-trivial: other class, d < alpha
};

/// Ranked list loss with non-trivial mining, averaged over anchors. Distances
/// are Euclidean on the raw features.
LossGrad rll_loss(const Tensor& features, const std::vector<int>& labels, const RllConfig& cfg,
                  RllMining* mining = nullptr);

/// Half the summed squared distance of each feature to its class center.
/// Centers are constants for this gradient.
LossGrad center_loss(const Tensor& features, const std::vector<int>& labels, const CenterBank& bank);

/// Moves each center present in the batch toward its batch class mean:
/// c <- c - lr * (c - mean(f_class)). Absent classes stay untouched.
void update_centers(CenterBank& bank, const Tensor& features, const std::vector<int>& labels);

/// Mean over clips of (1/T) sum_t erase_label_t * score_t.
LossGrad erase_attention_loss(const Tensor& scores, const Tensor& erase_labels);

struct LossBundle {
  Scalar total = 0.0;
  Scalar id = 0.0;
  Scalar rll = 0.0;
  Scalar center = 0.0;      // unweighted
  Scalar erase_attn = 0.0;  // signed per negate_erase
};

/// total = id + rll + beta * center + erase. Throws NumericError naming the
/// first non-finite component.
LossBundle total_loss(Scalar id, Scalar rll, Scalar center, Scalar erase_attn, const LossWeights& weights);

}  // namespace vreid::loss
