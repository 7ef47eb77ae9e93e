#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "vreid/model/reid_model.hpp"

namespace vreid::model {

/// Checkpoint container: versioned JSON header (specs, epoch, rng note,
/// arbitrary metadata) followed by named raw tensors.
struct Checkpoint {
  nlohmann::json meta;
  std::map<std::string, Tensor> tensors;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Snapshot of the model's parameters, buffers and specs.
Checkpoint snapshot_model(ReidModel& model);

/// Loads matching tensors by name and shape. In strict mode any mismatch or
/// missing tensor is an error. In lenient mode mismatches are skipped (logged
/// to `log` when given) and a classifier whose class count differs is
/// reinitialized with Kaiming weights.
void init_from_checkpoint(ReidModel& model, const std::filesystem::path& path, bool strict,
                          std::ostream* log = nullptr);

/// Same, from an already-read checkpoint.
void load_into_model(ReidModel& model, const Checkpoint& ckpt, bool strict, std::ostream* log = nullptr);

}  // namespace vreid::model
