#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "vreid/core/error.hpp"

namespace vreid::data {

enum class Split { train, query, gallery };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct TrackletRecord {
  int person_id = -1;
  int camera_id = -1;
  std::vector<std::string> frame_paths;  // temporal order
  Split split = Split::train;
  std::string key;  // unique within a dataset, e.g. "0003_c1_t0"

  int length() const { return static_cast<int>(frame_paths.size()); }
};

/// Immutable catalog of every tracklet in a dataset. Safe to share across
/// concurrent readers once built.
struct TrackletIndex {
  std::string root;
  std::string layout;
  std::vector<TrackletRecord> tracklets;

  std::vector<const TrackletRecord*> split(Split s) const;
  std::vector<int> split_person_ids(Split s) const;  // sorted unique

  /// Contiguous class label for a training person id.
  int train_label(int person_id) const;
  int num_train_ids() const { return static_cast<int>(train_labels_.size()); }

  void build_label_map();

 private:
  std::unordered_map<int, int> train_labels_;
};

/// Walks a dataset root laid out per `layout` (one of mars, prid2011,
/// ilids-vid, synthetic) and catalogs every tracklet with its protocol split.
/// Deterministic: directory entries are processed in sorted order.
TrackletIndex scan_dataset(const std::filesystem::path& root, const std::string& layout);

/// One tab-separated record per tracklet: id, cam, split, frame paths.
void save_manifest(const TrackletIndex& index, const std::filesystem::path& path);
TrackletIndex load_manifest(const std::filesystem::path& path);

}  // namespace vreid::data
