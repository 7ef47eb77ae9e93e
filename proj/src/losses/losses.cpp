#include "vreid/losses/losses.hpp"

#include <algorithm>
#include <cmath>

namespace vreid::loss {

void RllConfig::validate() const {
  if (!(alpha > 0.0)) throw ValidationError(cat("rll.alpha must be positive, got ", alpha));
  if (!(margin > 0.0 && margin < alpha))
    throw ValidationError(cat("rll.margin must satisfy 0 < m < alpha, got m=", margin, " alpha=", alpha));
  if (lambda < 0.0) throw ValidationError(cat("rll.lambda must be >= 0, got ", lambda));
  if (temperature < 0.0) throw ValidationError(cat("rll.temperature must be >= 0, got ", temperature));
}

void LossWeights::validate() const {
  if (beta < 0.0) throw ValidationError(cat("beta must be >= 0, got ", beta));
  if (epsilon < 0.0 || epsilon >= 1.0) throw ValidationError(cat("epsilon must be in [0, 1), got ", epsilon));
}

// ---------------------------------------------------------------------------
// ID loss (label-smoothed cross entropy)
// ---------------------------------------------------------------------------

LossGrad id_loss(const Tensor& logits, const std::vector<int>& labels, Scalar epsilon) {
  if (logits.ndim() != 2) throw ValidationError(cat("id_loss: logits must be (B, N), got ", shape_str(logits.shape())));
  const int b = logits.dim(0), n = logits.dim(1);
  if (static_cast<int>(labels.size()) != b)
    throw ValidationError(cat("id_loss: ", labels.size(), " labels for batch of ", b));
  if (epsilon < 0.0 || epsilon >= 1.0) throw ValidationError(cat("epsilon must be in [0, 1), got ", epsilon));
  for (int i = 0; i < b; ++i)
    if (labels[static_cast<std::size_t>(i)] < 0 || labels[static_cast<std::size_t>(i)] >= n)
      throw ValidationError(cat("id_loss: label ", labels[static_cast<std::size_t>(i)], " out of range [0, ", n, ")"));

  const Scalar q_true = 1.0 - (static_cast<Scalar>(n - 1) / n) * epsilon;
  const Scalar q_other = epsilon / n;

  LossGrad out;
  out.grad = Tensor({b, n});
  for (int i = 0; i < b; ++i) {
    Scalar mx = logits(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, logits(i, j));
    Scalar sum = 0.0;
    for (int j = 0; j < n; ++j) sum += std::exp(logits(i, j) - mx);
    const Scalar log_sum = std::log(sum) + mx;

    const int y = labels[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) {
      const Scalar q = j == y ? q_true : q_other;
      const Scalar log_p = logits(i, j) - log_sum;
      out.value -= q * log_p;
      const Scalar p = std::exp(log_p);
      out.grad(i, j) = (p - q) / static_cast<Scalar>(b);
    }
  }
  out.value /= static_cast<Scalar>(b);
  return out;
}

// ---------------------------------------------------------------------------
// Ranked list loss
// ---------------------------------------------------------------------------

LossGrad rll_loss(const Tensor& features, const std::vector<int>& labels, const RllConfig& cfg,
                  RllMining* mining) {
  cfg.validate();
  if (features.ndim() != 2)
    throw ValidationError(cat("rll_loss: features must be (B, D), got ", shape_str(features.shape())));
  const int b = features.dim(0), d = features.dim(1);
  if (static_cast<int>(labels.size()) != b)
    throw ValidationError(cat("rll_loss: ", labels.size(), " labels for batch of ", b));
  if (!features.all_finite()) throw NumericError("rll_loss: non-finite features");

  // Pairwise Euclidean distances.
  std::vector<Scalar> dist(static_cast<std::size_t>(b) * b, 0.0);
  for (int i = 0; i < b; ++i)
    for (int j = i + 1; j < b; ++j) {
      Scalar sq = 0.0;
      for (int k = 0; k < d; ++k) {
        const Scalar diff = features(i, k) - features(j, k);
        sq += diff * diff;
      }
      const Scalar dij = std::sqrt(sq);
      dist[static_cast<std::size_t>(i) * b + j] = dij;
      dist[static_cast<std::size_t>(j) * b + i] = dij;
    }

  if (mining) {
    mining->positives.assign(static_cast<std::size_t>(b), {});
    mining->negatives.assign(static_cast<std::size_t>(b), {});
  }

  LossGrad out;
  out.grad = Tensor({b, d});
  const Scalar boundary = cfg.alpha - cfg.margin;

  // Accumulates dL/dd_ij into the feature gradient through the distance.
  auto add_pair_grad = [&](int i, int j, Scalar coeff) {
    const Scalar dij = dist[static_cast<std::size_t>(i) * b + j];
    if (dij < 1e-12) return;  // zero-distance pair: direction undefined, gradient 0
    const Scalar scale = coeff / dij;
    for (int k = 0; k < d; ++k) {
      const Scalar diff = features(i, k) - features(j, k);
      out.grad(i, k) += scale * diff;
      out.grad(j, k) -= scale * diff;
    }
  };

  for (int anchor = 0; anchor < b; ++anchor) {
    std::vector<int> pos, neg;
    for (int j = 0; j < b; ++j) {
      if (j == anchor) continue;
      const Scalar dij = dist[static_cast<std::size_t>(anchor) * b + j];
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(anchor)]) {
        if (dij > boundary) pos.push_back(j);
      } else {
        if (dij < cfg.alpha) neg.push_back(j);
      }
    }
    if (mining) {
      mining->positives[static_cast<std::size_t>(anchor)] = pos;
      mining->negatives[static_cast<std::size_t>(anchor)] = neg;
    }

    if (!pos.empty()) {
      const Scalar inv = 1.0 / static_cast<Scalar>(pos.size());
      for (int j : pos) {
        const Scalar dij = dist[static_cast<std::size_t>(anchor) * b + j];
        out.value += inv * (dij - boundary) / static_cast<Scalar>(b);
        add_pair_grad(anchor, j, inv / static_cast<Scalar>(b));
      }
    }

    if (!neg.empty() && cfg.lambda > 0.0) {
      // Normalized weights over the non-trivial negatives.
      std::vector<Scalar> w(neg.size());
      Scalar wsum = 0.0;
      for (std::size_t k = 0; k < neg.size(); ++k) {
        const Scalar dij = dist[static_cast<std::size_t>(anchor) * b + neg[k]];
        w[k] = std::exp(cfg.temperature * (cfg.alpha - dij));
        wsum += w[k];
      }
      Scalar ln = 0.0;
      for (std::size_t k = 0; k < neg.size(); ++k) {
        w[k] /= wsum;
        const Scalar h = cfg.alpha - dist[static_cast<std::size_t>(anchor) * b + neg[k]];
        ln += w[k] * h;
      }
      out.value += cfg.lambda * ln / static_cast<Scalar>(b);
      // dL_N/dd_k = w_k * (-1 + temperature * (L_N - h_k)); the temperature
      // term comes from the weight normalization.
      for (std::size_t k = 0; k < neg.size(); ++k) {
        const Scalar h = cfg.alpha - dist[static_cast<std::size_t>(anchor) * b + neg[k]];
        const Scalar dd = w[k] * (-1.0 + cfg.temperature * (ln - h));
        add_pair_grad(anchor, neg[k], cfg.lambda * dd / static_cast<Scalar>(b));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Center loss
// ---------------------------------------------------------------------------

static void check_center_labels(const Tensor& features, const std::vector<int>& labels,
                                const CenterBank& bank) {
  if (features.ndim() != 2)
    throw ValidationError(cat("center_loss: features must be (B, D), got ", shape_str(features.shape())));
  if (static_cast<int>(labels.size()) != features.dim(0))
    throw ValidationError(cat("center_loss: ", labels.size(), " labels for batch of ", features.dim(0)));
  if (features.dim(1) != bank.dim())
    throw ValidationError(cat("center_loss: feature dim ", features.dim(1), " vs center dim ", bank.dim()));
  for (int l : labels)
    if (l < 0 || l >= bank.num_classes())
      throw ValidationError(cat("center_loss: label ", l, " has no center row (num_classes=", bank.num_classes(), ")"));
}

LossGrad center_loss(const Tensor& features, const std::vector<int>& labels, const CenterBank& bank) {
  check_center_labels(features, labels, bank);
  const int b = features.dim(0), d = features.dim(1);

  LossGrad out;
  out.grad = Tensor({b, d});
  for (int i = 0; i < b; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    for (int k = 0; k < d; ++k) {
      const Scalar diff = features(i, k) - bank.centers(y, k);
      out.value += 0.5 * diff * diff;
      out.grad(i, k) = diff;
    }
  }
  return out;
}

void update_centers(CenterBank& bank, const Tensor& features, const std::vector<int>& labels) {
  check_center_labels(features, labels, bank);
  const int b = features.dim(0), d = features.dim(1);

  std::vector<int> counts(static_cast<std::size_t>(bank.num_classes()), 0);
  Tensor sums({bank.num_classes(), d});
  for (int i = 0; i < b; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    ++counts[static_cast<std::size_t>(y)];
    for (int k = 0; k < d; ++k) sums(y, k) += features(i, k);
  }
  for (int c = 0; c < bank.num_classes(); ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) continue;
    const Scalar inv = 1.0 / counts[static_cast<std::size_t>(c)];
    for (int k = 0; k < d; ++k) {
      const Scalar mean = sums(c, k) * inv;
      bank.centers(c, k) -= bank.learning_rate * (bank.centers(c, k) - mean);
    }
  }
}

// ---------------------------------------------------------------------------
// Erasing-attention loss
// ---------------------------------------------------------------------------

LossGrad erase_attention_loss(const Tensor& scores, const Tensor& erase_labels) {
  if (scores.ndim() != 2 || !scores.same_shape(erase_labels))
    throw ValidationError(cat("erase_attention_loss: scores ", shape_str(scores.shape()),
                              " vs labels ", shape_str(erase_labels.shape())));
  const int b = scores.dim(0), t = scores.dim(1);
  for (int i = 0; i < b; ++i) {
    Scalar row = 0.0;
    for (int j = 0; j < t; ++j) row += scores(i, j);
    if (std::abs(row - 1.0) > 1e-2)
      throw ValidationError(cat("erase_attention_loss: scores row ", i, " sums to ", row, ", expected 1"));
  }

  LossGrad out;
  out.grad = Tensor({b, t});
  const Scalar scale = 1.0 / (static_cast<Scalar>(b) * t);
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < t; ++j) {
      out.value += scale * erase_labels(i, j) * scores(i, j);
      out.grad(i, j) = scale * erase_labels(i, j);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

LossBundle total_loss(Scalar id, Scalar rll, Scalar center, Scalar erase_attn, const LossWeights& weights) {
  weights.validate();
  auto check = [](Scalar v, const char* name) {
    if (!std::isfinite(v)) throw NumericError(cat("total_loss: non-finite ", name, " component: ", v));
  };
  check(id, "id");
  check(rll, "rll");
  check(center, "center");
  check(erase_attn, "erase_attn");

  LossBundle bundle;
  bundle.id = id;
  bundle.rll = rll;
  bundle.center = center;
  bundle.erase_attn = erase_attn;
  bundle.total = id + rll + weights.beta * center + erase_attn;
  check(bundle.total, "total");
  return bundle;
}

}  // namespace vreid::loss
