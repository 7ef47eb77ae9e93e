#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vreid/core/random.hpp"
#include "vreid/data/dataset.hpp"

namespace vreid::data {

/// Fixed-length ordered frame selection from one tracklet.
struct Clip {
  const TrackletRecord* source = nullptr;
  std::vector<int> frame_indices;  // non-decreasing, each < source->length()

  int length() const { return static_cast<int>(frame_indices.size()); }
};

/// T frame indices drawn uniformly without replacement (with replacement when
/// the tracklet is shorter than T), sorted ascending to keep temporal order.
Clip sample_training_clip(const TrackletRecord& tracklet, int t, RandomSource& rng);

/// Consecutive non-overlapping T-frame windows covering the tracklet in order;
/// the final window repeats the last frame to reach length T.
std::vector<Clip> split_inference_clips(const TrackletRecord& tracklet, int t);

/// Identity-balanced batch structure: B = C x K.
struct BatchSpec {
  int num_ids = 8;       // C
  int clips_per_id = 4;  // K

  int batch_size() const { return num_ids * clips_per_id; }
  void validate() const;
};

/// Identity-balanced batch stream. Each batch holds exactly C distinct
/// identities with K tracklet draws each; identities with fewer than K
/// tracklets are drawn with replacement. One round of batches visits every
/// training identity at least once. Single consumer; all randomness derives
/// from (seed, epoch), so epochs can be regenerated independently.
class PkBatchStream {
 public:
  using Entry = std::pair<const TrackletRecord*, int>;  // (tracklet, train label)

  PkBatchStream(const TrackletIndex& index, BatchSpec spec, std::uint64_t seed);

  /// All batches of one epoch. `rounds` repeats the identity coverage; every
  /// round visits each identity at least once.
  std::vector<std::vector<Entry>> epoch_batches(int epoch, int rounds = 1) const;

  int num_identities() const { return static_cast<int>(by_label_.size()); }

 private:
  BatchSpec spec_;
  std::uint64_t seed_;
  std::vector<std::vector<const TrackletRecord*>> by_label_;
};

}  // namespace vreid::data
