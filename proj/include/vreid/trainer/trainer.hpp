#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "vreid/config.hpp"
#include "vreid/data/dataset.hpp"
#include "vreid/eval/protocol.hpp"
#include "vreid/losses/losses.hpp"
#include "vreid/model/reid_model.hpp"

namespace vreid::train {

struct EpochRecord {
  int epoch = 0;
  Scalar lr = 0.0;
  int steps = 0;
  Scalar id = 0.0, rll = 0.0, center = 0.0, erase = 0.0, total = 0.0;  // epoch means

  bool operator==(const EpochRecord&) const = default;
};

struct ValRecord {
  int epoch = 0;
  double rank1 = 0.0;
  double map_score = 0.0;

  bool operator==(const ValRecord&) const = default;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::vector<ValRecord> validations;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  double best_rank1 = 0.0;
  int best_epoch = 0;
  int first_full_rank1_epoch = -1;  // first validation epoch with rank-1 == 1.0
  std::shared_ptr<model::ReidModel> model;
  std::shared_ptr<loss::CenterBank> centers;
};

/// Runs the full training loop described by the config: PK batches, the
/// four-part loss, warmup schedule, periodic validation and checkpointing.
/// The single trainer thread owns parameters, optimizer state and centers.
TrainResult train(const RunConfig& config);

}  // namespace vreid::train
