#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "vreid/data/sampling.hpp"
#include "vreid/eval/protocol.hpp"
#include "vreid/losses/losses.hpp"
#include "vreid/model/reid_model.hpp"
#include "vreid/optim/optim.hpp"
#include "vreid/transforms/transforms.hpp"

namespace vreid {

struct DatasetConfig {
  std::string root;
  std::string layout = "synthetic";
};

struct TrainerConfig {
  std::uint64_t seed = 1;
  bool deterministic = true;
  int val_cadence = 10;       // validate every N epochs
  int rounds_per_epoch = 1;   // identity-coverage rounds per epoch
  std::string out_dir = "runs/default";
  std::string init_checkpoint;  // transfer-learning initialization
  bool init_strict = false;
  std::string resume;  // checkpoint to resume from
};

struct RunConfig {
  DatasetConfig dataset;
  int clip_len = 4;
  data::BatchSpec batch;
  tfm::TransformConfig transform;
  model::FrameEncoderSpec encoder;
  model::HeadSpec head;
  loss::LossWeights loss_weights;
  loss::RllConfig rll;
  Scalar center_lr = 0.5;
  optim::ScheduleConfig schedule;
  TrainerConfig train;
  evalkit::EvalConfig eval;

  void validate() const;
};

/// Default config as JSON (the full schema, every key present).
nlohmann::json default_config_json();

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

/// Loads a config file, laying it over the defaults. Unknown keys are errors.
RunConfig load_config(const std::filesystem::path& path);

/// Applies one `--set key.path=value` override in place. The key must exist.
void apply_override(nlohmann::json& config, const std::string& assignment);

}  // namespace vreid
