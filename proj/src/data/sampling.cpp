#include "vreid/data/sampling.hpp"

#include <algorithm>

namespace vreid::data {

Clip sample_training_clip(const TrackletRecord& tracklet, int t, RandomSource& rng) {
  if (t <= 0) throw ValidationError(cat("clip length must be positive, got ", t));
  const int n = tracklet.length();
  if (n == 0) throw ValidationError(cat("tracklet ", tracklet.key, " has no frames"));

  Clip clip;
  clip.source = &tracklet;
  clip.frame_indices = rng.sample_indices(n, t);
  std::sort(clip.frame_indices.begin(), clip.frame_indices.end());
  return clip;
}

std::vector<Clip> split_inference_clips(const TrackletRecord& tracklet, int t) {
  if (t <= 0) throw ValidationError(cat("clip length must be positive, got ", t));
  const int n = tracklet.length();
  if (n == 0) throw ValidationError(cat("tracklet ", tracklet.key, " has no frames"));

  const int m = (n + t - 1) / t;
  std::vector<Clip> clips(static_cast<std::size_t>(m));
  for (int ci = 0; ci < m; ++ci) {
    Clip& clip = clips[static_cast<std::size_t>(ci)];
    clip.source = &tracklet;
    clip.frame_indices.reserve(static_cast<std::size_t>(t));
    for (int k = 0; k < t; ++k) {
      const int idx = ci * t + k;
      clip.frame_indices.push_back(std::min(idx, n - 1));
    }
  }
  return clips;
}

void BatchSpec::validate() const {
  if (num_ids < 2)
    throw ValidationError(cat("BatchSpec: C must be >= 2 (metric losses need negatives), got ", num_ids));
  if (clips_per_id < 2)
    throw ValidationError(cat("BatchSpec: K must be >= 2 (metric losses need positives), got ", clips_per_id));
}

PkBatchStream::PkBatchStream(const TrackletIndex& index, BatchSpec spec, std::uint64_t seed)
    : spec_(spec), seed_(seed) {
  spec_.validate();
  const auto train_ids = index.split_person_ids(Split::train);
  by_label_.assign(train_ids.size(), {});
  for (const auto& t : index.tracklets)
    if (t.split == Split::train) by_label_[static_cast<std::size_t>(index.train_label(t.person_id))].push_back(&t);
  if (static_cast<int>(by_label_.size()) < spec_.num_ids)
    throw ConfigError(cat("PK sampler needs at least C=", spec_.num_ids, " train identities, dataset has ",
                          by_label_.size()));
}

std::vector<std::vector<PkBatchStream::Entry>> PkBatchStream::epoch_batches(int epoch, int rounds) const {
  if (rounds < 1) throw ValidationError(cat("rounds must be >= 1, got ", rounds));
  RandomSource rng(derive_seed(seed_, {0x706b /*"pk"*/, static_cast<std::uint64_t>(epoch)}));

  const int num_labels = num_identities();
  std::vector<std::vector<Entry>> batches;
  for (int round = 0; round < rounds; ++round) {
    std::vector<int> order(static_cast<std::size_t>(num_labels));
    for (int i = 0; i < num_labels; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);

    for (int start = 0; start < num_labels; start += spec_.num_ids) {
      std::vector<int> ids(order.begin() + start,
                           order.begin() + std::min(start + spec_.num_ids, num_labels));
      // Pad the final window with distinct earlier identities so the batch
      // still carries exactly C distinct classes.
      while (static_cast<int>(ids.size()) < spec_.num_ids) {
        const int candidate = order[static_cast<std::size_t>(rng.uniform_int(start))];
        if (std::find(ids.begin(), ids.end(), candidate) == ids.end()) ids.push_back(candidate);
      }

      std::vector<Entry> batch;
      batch.reserve(static_cast<std::size_t>(spec_.batch_size()));
      for (int label : ids) {
        const auto& pool = by_label_[static_cast<std::size_t>(label)];
        const auto picks = rng.sample_indices(static_cast<int>(pool.size()), spec_.clips_per_id);
        for (int p : picks) batch.emplace_back(pool[static_cast<std::size_t>(p)], label);
      }
      batches.push_back(std::move(batch));
    }
  }
  return batches;
}

}  // namespace vreid::data
