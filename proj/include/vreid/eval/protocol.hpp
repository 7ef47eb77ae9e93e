#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vreid/data/dataset.hpp"
#include "vreid/eval/metrics.hpp"
#include "vreid/model/reid_model.hpp"
#include "vreid/transforms/transforms.hpp"

namespace vreid::evalkit {

enum class FeatureSpace { post_bn, pre_bn };

struct VideoFeature {
  std::vector<Scalar> vec;
  int person_id = -1;
  int camera_id = -1;
  std::string tracklet_key;
};

/// Splits the tracklet into consecutive T-frame clips, runs each through the
/// model in eval mode and averages the clip features.
VideoFeature extract_video_feature(const data::TrackletRecord& tracklet, model::ReidModel& model,
                                   int clip_len, const tfm::TransformConfig& eval_tf,
                                   FeatureSpace space = FeatureSpace::post_bn);

struct EvalConfig {
  int clip_len = 4;
  FeatureSpace feature = FeatureSpace::post_bn;
  Metric metric = Metric::euclidean;
  std::string protocol = "auto";  // auto | fixed | cross-camera-splits
  int num_splits = 10;            // for the cross-camera protocol
  std::vector<int> ranks{1, 5, 10, 20};
  std::uint64_t seed = 1;
};

struct EvalReport {
  std::map<int, double> cmc;
  double map_score = 0.0;
  nlohmann::json protocol() const;  // descriptor: dataset, splits, feature space, counts

  // descriptor fields
  std::string dataset;
  std::string protocol_name;
  std::string feature_space;
  std::string metric_name;
  int num_splits = 1;
  int clip_len = 4;
  int num_query = 0;
  int num_gallery = 0;
  int excluded_queries = 0;

  std::string table() const;
};

/// Dataset-appropriate evaluation:
///  - mars / synthetic / manifest: fixed query vs gallery split. For mars the
///    gallery side also carries the query tracklets (standard protocol); the
///    synthetic layout evaluates the train split against itself cross-camera.
///  - prid2011 / ilids-vid: averaged over `num_splits` random half splits,
///    camera-0 probes against camera-1 gallery.
EvalReport run_protocol(const data::TrackletIndex& index, model::ReidModel& model,
                        const tfm::TransformConfig& eval_tf, const EvalConfig& cfg);

/// Binary matrix file (path.bin) plus tab-separated sidecar (path.tsv) with
/// id, camera and tracklet key per row.
void dump_features(const std::filesystem::path& base, const std::vector<VideoFeature>& features);
std::vector<VideoFeature> load_features(const std::filesystem::path& base);

}  // namespace vreid::evalkit
