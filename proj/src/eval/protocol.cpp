#include "vreid/eval/protocol.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "vreid/core/random.hpp"
#include "vreid/data/sampling.hpp"

namespace vreid::evalkit {

namespace fs = std::filesystem;
using nlohmann::json;

VideoFeature extract_video_feature(const data::TrackletRecord& tracklet, model::ReidModel& model,
                                   int clip_len, const tfm::TransformConfig& eval_tf,
                                   FeatureSpace space) {
  if (tracklet.length() == 0) throw ValidationError(cat("tracklet ", tracklet.key, " has no frames"));
  const auto clips = data::split_inference_clips(tracklet, clip_len);

  tfm::TransformConfig cfg = eval_tf;
  cfg.train = false;
  RandomSource rng(0);  // eval pipeline draws nothing

  const int d = model.embed_dim();
  VideoFeature feature;
  feature.vec.assign(static_cast<std::size_t>(d), 0.0);
  feature.person_id = tracklet.person_id;
  feature.camera_id = tracklet.camera_id;
  feature.tracklet_key = tracklet.key;

  for (const auto& clip : clips) {
    std::vector<cv::Mat> images;
    images.reserve(clip.frame_indices.size());
    for (int idx : clip.frame_indices)
      images.push_back(tfm::load_image(tracklet.frame_paths[static_cast<std::size_t>(idx)]));
    auto prepared = tfm::preprocess_clip(images, cfg, rng);
    const int t = prepared.frames.dim(0);
    Tensor batch = prepared.frames.reshaped({1, t, 3, cfg.height, cfg.width});
    auto out = model.forward(batch, false);
    const Tensor& clip_feat = space == FeatureSpace::post_bn ? out.post_bn : out.clip_pre;
    for (int k = 0; k < d; ++k) feature.vec[static_cast<std::size_t>(k)] += clip_feat(0, k);
  }
  const Scalar inv = 1.0 / static_cast<Scalar>(clips.size());
  for (Scalar& v : feature.vec) v *= inv;
  return feature;
}

namespace {

Tensor stack_features(const std::vector<const VideoFeature*>& feats) {
  if (feats.empty()) throw ValidationError("no features to stack");
  const int d = static_cast<int>(feats.front()->vec.size());
  Tensor out({static_cast<int>(feats.size()), d});
  for (int i = 0; i < static_cast<int>(feats.size()); ++i) {
    if (static_cast<int>(feats[static_cast<std::size_t>(i)]->vec.size()) != d)
      throw ValidationError("inconsistent feature dimensions");
    for (int k = 0; k < d; ++k) out(i, k) = feats[static_cast<std::size_t>(i)]->vec[static_cast<std::size_t>(k)];
  }
  return out;
}

std::vector<ItemMeta> meta_of(const std::vector<const VideoFeature*>& feats) {
  std::vector<ItemMeta> out;
  out.reserve(feats.size());
  for (const auto* f : feats) out.push_back({f->person_id, f->camera_id});
  return out;
}

struct FeatureCache {
  std::vector<VideoFeature> all;
  std::map<const data::TrackletRecord*, std::size_t> lookup;

  const VideoFeature* at(const data::TrackletRecord* rec) const {
    auto it = lookup.find(rec);
    if (it == lookup.end()) throw ValidationError(cat("no cached feature for tracklet ", rec->key));
    return &all[it->second];
  }
};

FeatureCache extract_all(const std::vector<const data::TrackletRecord*>& records,
                         model::ReidModel& model, const tfm::TransformConfig& eval_tf,
                         const EvalConfig& cfg) {
  FeatureCache cache;
  cache.all.reserve(records.size());
  for (const auto* rec : records) {
    cache.lookup.emplace(rec, cache.all.size());
    cache.all.push_back(extract_video_feature(*rec, model, cfg.clip_len, eval_tf, cfg.feature));
  }
  return cache;
}

EvalReport evaluate_sets(const std::vector<const VideoFeature*>& query,
                         const std::vector<const VideoFeature*>& gallery, const EvalConfig& cfg) {
  const Tensor qm = stack_features(query);
  const Tensor gm = stack_features(gallery);
  const Tensor dist = distance_matrix(qm, gm, cfg.metric);
  const auto qmeta = meta_of(query);
  const auto gmeta = meta_of(gallery);

  EvalReport report;
  const auto cmc = compute_cmc(dist, qmeta, gmeta, cfg.ranks);
  const auto map = compute_map(dist, qmeta, gmeta);
  report.cmc = cmc.cmc;
  report.map_score = map.map;
  report.num_query = static_cast<int>(query.size());
  report.num_gallery = static_cast<int>(gallery.size());
  report.excluded_queries = cmc.excluded;
  return report;
}

}  // namespace

EvalReport run_protocol(const data::TrackletIndex& index, model::ReidModel& model,
                        const tfm::TransformConfig& eval_tf, const EvalConfig& cfg) {
  std::string protocol = cfg.protocol;
  if (protocol == "auto")
    protocol = (index.layout == "prid2011" || index.layout == "ilids-vid") ? "cross-camera-splits" : "fixed";

  EvalReport report;
  report.dataset = index.layout;
  report.protocol_name = protocol;
  report.feature_space = cfg.feature == FeatureSpace::post_bn ? "post_bn" : "pre_bn";
  report.metric_name = cfg.metric == Metric::euclidean ? "euclidean" : "cosine";
  report.clip_len = cfg.clip_len;
  report.num_splits = 1;

  if (protocol == "fixed") {
    auto queries = index.split(data::Split::query);
    auto gallery = index.split(data::Split::gallery);
    if (queries.empty() && gallery.empty()) {
      // Closed-set evaluation on the train split (synthetic datasets): every
      // tracklet queries the others cross-camera.
      auto train = index.split(data::Split::train);
      if (train.empty()) throw ConfigError("fixed protocol: dataset has no query/gallery or train split");
      queries = train;
      gallery = train;
    } else if (queries.empty() || gallery.empty()) {
      throw ConfigError(cat("fixed protocol: missing ", queries.empty() ? "query" : "gallery", " split"));
    } else {
      // Standard fixed protocol: query tracklets participate in the gallery;
      // the same-id same-camera filter removes each query's own entry.
      for (const auto* q : queries) gallery.push_back(q);
    }

    std::set<const data::TrackletRecord*> unique(queries.begin(), queries.end());
    unique.insert(gallery.begin(), gallery.end());
    std::vector<const data::TrackletRecord*> records(unique.begin(), unique.end());
    const auto cache = extract_all(records, model, eval_tf, cfg);

    std::vector<const VideoFeature*> qf, gf;
    for (const auto* r : queries) qf.push_back(cache.at(r));
    for (const auto* r : gallery) gf.push_back(cache.at(r));
    EvalReport inner = evaluate_sets(qf, gf, cfg);
    report.cmc = inner.cmc;
    report.map_score = inner.map_score;
    report.num_query = inner.num_query;
    report.num_gallery = inner.num_gallery;
    report.excluded_queries = inner.excluded_queries;
    return report;
  }

  if (protocol != "cross-camera-splits")
    throw ConfigError(cat("unknown evaluation protocol '", cfg.protocol, "'"));

  // Identities with tracklets under both cameras participate; each split holds
  // out half of them, probing camera 0 against a camera-1 gallery.
  std::map<int, std::vector<const data::TrackletRecord*>> cam0, cam1;
  for (const auto& t : index.tracklets) {
    if (t.camera_id == 0) cam0[t.person_id].push_back(&t);
    if (t.camera_id == 1) cam1[t.person_id].push_back(&t);
  }
  std::vector<int> eligible;
  for (const auto& [pid, recs] : cam0)
    if (cam1.count(pid)) eligible.push_back(pid);
  if (eligible.size() < 2)
    throw ConfigError("cross-camera protocol needs at least 2 identities present under both cameras");

  std::vector<const data::TrackletRecord*> records;
  for (int pid : eligible) {
    for (const auto* r : cam0[pid]) records.push_back(r);
    for (const auto* r : cam1[pid]) records.push_back(r);
  }
  const auto cache = extract_all(records, model, eval_tf, cfg);

  report.num_splits = cfg.num_splits;
  std::map<int, double> cmc_sum;
  for (int r : cfg.ranks) cmc_sum[r] = 0.0;
  double map_sum = 0.0;
  int nq = 0, ng = 0, excluded = 0;

  for (int split = 0; split < cfg.num_splits; ++split) {
    RandomSource rng(derive_seed(cfg.seed, {0x5711, static_cast<std::uint64_t>(split)}));
    std::vector<int> ids = eligible;
    rng.shuffle(ids);
    const int half = static_cast<int>(ids.size()) / 2;
    std::vector<const VideoFeature*> qf, gf;
    for (int i = 0; i < half; ++i) {
      const int pid = ids[static_cast<std::size_t>(i)];
      for (const auto* r : cam0[pid]) qf.push_back(cache.at(r));
      for (const auto* r : cam1[pid]) gf.push_back(cache.at(r));
    }
    EvalReport inner = evaluate_sets(qf, gf, cfg);
    for (auto& [r, v] : inner.cmc) cmc_sum[r] += v;
    map_sum += inner.map_score;
    nq += inner.num_query;
    ng += inner.num_gallery;
    excluded += inner.excluded_queries;
  }
  for (auto& [r, v] : cmc_sum) report.cmc[r] = v / cfg.num_splits;
  report.map_score = map_sum / cfg.num_splits;
  report.num_query = nq / cfg.num_splits;
  report.num_gallery = ng / cfg.num_splits;
  report.excluded_queries = excluded;
  return report;
}

json EvalReport::protocol() const {
  json j;
  j["dataset"] = dataset;
  j["protocol"] = protocol_name;
  j["feature_space"] = feature_space;
  j["metric"] = metric_name;
  j["num_splits"] = num_splits;
  j["clip_len"] = clip_len;
  j["num_query"] = num_query;
  j["num_gallery"] = num_gallery;
  j["excluded_queries"] = excluded_queries;
  if (dataset == "mars")
    j["notes"] = "junk tracklets (00-1) dropped at scan; 0000 distractors kept in the gallery";
  if (protocol_name == "cross-camera-splits")
    j["notes"] = "seeded random half splits; camera-0 probes vs camera-1 gallery, mean over splits";
  return j;
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << "dataset=" << dataset << " protocol=" << protocol_name << " feature=" << feature_space
     << " metric=" << metric_name << " T=" << clip_len << " splits=" << num_splits << "\n";
  os << "queries=" << num_query << " gallery=" << num_gallery << " excluded=" << excluded_queries << "\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& [r, v] : cmc) os << "rank-" << r << ": " << v << "\n";
  os << "mAP: " << map_score << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Feature dump: little-endian binary matrix + text sidecar.
// ---------------------------------------------------------------------------

static constexpr char kFeatureMagic[8] = {'V', 'R', 'F', 'E', 'A', 'T', '0', '1'};

void dump_features(const fs::path& base, const std::vector<VideoFeature>& features) {
  if (features.empty()) throw ValidationError("dump_features: nothing to write");
  const fs::path bin = fs::path(base.string() + ".bin");
  const fs::path tsv = fs::path(base.string() + ".tsv");

  std::ofstream out(bin, std::ios::binary);
  if (!out) throw IoError(cat("cannot write ", bin.string()));
  const std::int64_t rows = static_cast<std::int64_t>(features.size());
  const std::int64_t cols = static_cast<std::int64_t>(features.front().vec.size());
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  for (const auto& f : features) {
    if (static_cast<std::int64_t>(f.vec.size()) != cols)
      throw ValidationError("dump_features: inconsistent feature dimensions");
    out.write(reinterpret_cast<const char*>(f.vec.data()), static_cast<std::streamsize>(cols * sizeof(Scalar)));
  }

  std::ofstream side(tsv);
  if (!side) throw IoError(cat("cannot write ", tsv.string()));
  side << "# person_id\tcamera_id\ttracklet_key\n";
  for (const auto& f : features)
    side << f.person_id << '\t' << f.camera_id << '\t' << f.tracklet_key << '\n';
}

std::vector<VideoFeature> load_features(const fs::path& base) {
  const fs::path bin = fs::path(base.string() + ".bin");
  const fs::path tsv = fs::path(base.string() + ".tsv");
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw IoError(cat("cannot read ", bin.string()));
  char magic[8];
  in.read(magic, sizeof(magic));
  if (std::memcmp(magic, kFeatureMagic, sizeof(magic)) != 0)
    throw ValidationError(cat("not a feature file: ", bin.string()));
  std::int64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (rows <= 0 || cols <= 0) throw ValidationError(cat("corrupt feature file: ", bin.string()));

  std::vector<VideoFeature> features(static_cast<std::size_t>(rows));
  for (auto& f : features) {
    f.vec.assign(static_cast<std::size_t>(cols), 0.0);
    in.read(reinterpret_cast<char*>(f.vec.data()), static_cast<std::streamsize>(cols * sizeof(Scalar)));
  }
  if (!in) throw IoError(cat("truncated feature file: ", bin.string()));

  std::ifstream side(tsv);
  if (!side) throw IoError(cat("cannot read ", tsv.string()));
  std::string line;
  std::size_t row = 0;
  while (std::getline(side, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (row >= features.size()) throw ValidationError(cat("sidecar has more rows than ", bin.string()));
    std::istringstream is(line);
    std::string pid, cam, key;
    std::getline(is, pid, '\t');
    std::getline(is, cam, '\t');
    std::getline(is, key, '\t');
    features[row].person_id = std::stoi(pid);
    features[row].camera_id = std::stoi(cam);
    features[row].tracklet_key = key;
    ++row;
  }
  if (row != features.size()) throw ValidationError(cat("sidecar row count mismatch for ", bin.string()));
  return features;
}

}  // namespace vreid::evalkit
