#include "vreid/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace vreid {

using nlohmann::json;

void RunConfig::validate() const {
  if (clip_len < 1) throw ConfigError(cat("clip_len must be >= 1, got ", clip_len));
  if (train.val_cadence < 1) throw ConfigError(cat("val_cadence must be >= 1, got ", train.val_cadence));
  if (train.rounds_per_epoch < 1)
    throw ConfigError(cat("rounds_per_epoch must be >= 1, got ", train.rounds_per_epoch));
  if (center_lr < 0.0) throw ConfigError(cat("center_lr must be >= 0, got ", center_lr));
  batch.validate();
  transform.validate();
  encoder.validate();
  rll.validate();
  loss_weights.validate();
  schedule.validate();
  if (eval.clip_len < 1) throw ConfigError(cat("eval.clip_len must be >= 1, got ", eval.clip_len));
  if (eval.num_splits < 1) throw ConfigError(cat("eval.num_splits must be >= 1, got ", eval.num_splits));
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["dataset"] = {{"root", cfg.dataset.root}, {"layout", cfg.dataset.layout}};
  j["clip_len"] = cfg.clip_len;
  j["batch"] = {{"num_ids", cfg.batch.num_ids}, {"clips_per_id", cfg.batch.clips_per_id}};
  j["transform"] = {
      {"height", cfg.transform.height},
      {"width", cfg.transform.width},
      {"pad", cfg.transform.pad},
      {"flip_prob", cfg.transform.flip_prob},
      {"mean", cfg.transform.mean},
      {"std", cfg.transform.stddev},
      {"rea",
       {{"probability", cfg.transform.rea.probability},
        {"area_min", cfg.transform.rea.area_min},
        {"area_max", cfg.transform.rea.area_max},
        {"aspect_min", cfg.transform.rea.aspect_min},
        {"fill", cfg.transform.rea.fill == tfm::ReaConfig::Fill::random ? "random" : "mean"}}},
  };
  j["encoder"] = {{"name", cfg.encoder.name},
                  {"embed_dim", cfg.encoder.embed_dim},
                  {"last_stride", cfg.encoder.last_stride},
                  {"pretrained", cfg.encoder.pretrained}};
  j["head"] = {{"num_classes", cfg.head.num_classes},
               {"attn_reduce_dim", cfg.head.attn_reduce_dim},
               {"temporal_kernel", cfg.head.temporal_kernel},
               {"bnneck_before_dml", cfg.head.bnneck_before_dml}};
  j["loss"] = {{"epsilon", cfg.loss_weights.epsilon},
               {"beta", cfg.loss_weights.beta},
               {"negate_erase_loss", cfg.loss_weights.negate_erase},
               {"center_lr", cfg.center_lr},
               {"rll",
                {{"alpha", cfg.rll.alpha},
                 {"margin", cfg.rll.margin},
                 {"lambda", cfg.rll.lambda},
                 {"temperature", cfg.rll.temperature}}}};
  j["schedule"] = {{"base_lr", cfg.schedule.base_lr},
                   {"warmup_epochs", cfg.schedule.warmup_epochs},
                   {"decay_epochs", cfg.schedule.decay_epochs},
                   {"total_epochs", cfg.schedule.total_epochs}};
  j["train"] = {{"seed", cfg.train.seed},
                {"deterministic", cfg.train.deterministic},
                {"val_cadence", cfg.train.val_cadence},
                {"rounds_per_epoch", cfg.train.rounds_per_epoch},
                {"out_dir", cfg.train.out_dir},
                {"init_checkpoint", cfg.train.init_checkpoint},
                {"init_strict", cfg.train.init_strict},
                {"resume", cfg.train.resume}};
  j["eval"] = {{"clip_len", cfg.eval.clip_len},
               {"feature", cfg.eval.feature == evalkit::FeatureSpace::post_bn ? "post_bn" : "pre_bn"},
               {"metric", cfg.eval.metric == evalkit::Metric::euclidean ? "euclidean" : "cosine"},
               {"protocol", cfg.eval.protocol},
               {"num_splits", cfg.eval.num_splits},
               {"ranks", cfg.eval.ranks}};
  return j;
}

json default_config_json() { return config_to_json(RunConfig{}); }

namespace {

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(cat("config key '", key, "': ", e.what()));
  }
}

void check_keys(const json& node, const json& reference, const std::string& path) {
  if (!node.is_object()) return;
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string child = path.empty() ? it.key() : path + "." + it.key();
    if (!reference.contains(it.key())) throw ConfigError(cat("unknown config key '", child, "'"));
    if (it->is_object()) check_keys(*it, reference.at(it.key()), child);
  }
}

void deep_merge(json& base, const json& overlay) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
      deep_merge(base[it.key()], *it);
    else
      base[it.key()] = *it;
  }
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  const json& ds = j.at("dataset");
  cfg.dataset.root = get<std::string>(ds, "root");
  cfg.dataset.layout = get<std::string>(ds, "layout");
  cfg.clip_len = get<int>(j, "clip_len");

  const json& b = j.at("batch");
  cfg.batch.num_ids = get<int>(b, "num_ids");
  cfg.batch.clips_per_id = get<int>(b, "clips_per_id");

  const json& t = j.at("transform");
  cfg.transform.height = get<int>(t, "height");
  cfg.transform.width = get<int>(t, "width");
  cfg.transform.pad = get<int>(t, "pad");
  cfg.transform.flip_prob = get<Scalar>(t, "flip_prob");
  cfg.transform.mean = get<std::array<Scalar, 3>>(t, "mean");
  cfg.transform.stddev = get<std::array<Scalar, 3>>(t, "std");
  const json& rea = t.at("rea");
  cfg.transform.rea.probability = get<Scalar>(rea, "probability");
  cfg.transform.rea.area_min = get<Scalar>(rea, "area_min");
  cfg.transform.rea.area_max = get<Scalar>(rea, "area_max");
  cfg.transform.rea.aspect_min = get<Scalar>(rea, "aspect_min");
  const std::string fill = get<std::string>(rea, "fill");
  if (fill != "random" && fill != "mean") throw ConfigError(cat("rea.fill must be random or mean, got '", fill, "'"));
  cfg.transform.rea.fill = fill == "random" ? tfm::ReaConfig::Fill::random : tfm::ReaConfig::Fill::mean;

  const json& e = j.at("encoder");
  cfg.encoder.name = get<std::string>(e, "name");
  cfg.encoder.embed_dim = get<int>(e, "embed_dim");
  cfg.encoder.last_stride = get<int>(e, "last_stride");
  cfg.encoder.pretrained = get<std::string>(e, "pretrained");

  const json& h = j.at("head");
  cfg.head.num_classes = get<int>(h, "num_classes");
  cfg.head.attn_reduce_dim = get<int>(h, "attn_reduce_dim");
  cfg.head.temporal_kernel = get<int>(h, "temporal_kernel");
  cfg.head.bnneck_before_dml = get<bool>(h, "bnneck_before_dml");

  const json& l = j.at("loss");
  cfg.loss_weights.epsilon = get<Scalar>(l, "epsilon");
  cfg.loss_weights.beta = get<Scalar>(l, "beta");
  cfg.loss_weights.negate_erase = get<bool>(l, "negate_erase_loss");
  cfg.center_lr = get<Scalar>(l, "center_lr");
  const json& rll = l.at("rll");
  cfg.rll.alpha = get<Scalar>(rll, "alpha");
  cfg.rll.margin = get<Scalar>(rll, "margin");
  cfg.rll.lambda = get<Scalar>(rll, "lambda");
  cfg.rll.temperature = get<Scalar>(rll, "temperature");

  const json& s = j.at("schedule");
  cfg.schedule.base_lr = get<Scalar>(s, "base_lr");
  cfg.schedule.warmup_epochs = get<int>(s, "warmup_epochs");
  cfg.schedule.decay_epochs = get<std::vector<int>>(s, "decay_epochs");
  cfg.schedule.total_epochs = get<int>(s, "total_epochs");

  const json& tr = j.at("train");
  cfg.train.seed = get<std::uint64_t>(tr, "seed");
  cfg.train.deterministic = get<bool>(tr, "deterministic");
  cfg.train.val_cadence = get<int>(tr, "val_cadence");
  cfg.train.rounds_per_epoch = get<int>(tr, "rounds_per_epoch");
  cfg.train.out_dir = get<std::string>(tr, "out_dir");
  cfg.train.init_checkpoint = get<std::string>(tr, "init_checkpoint");
  cfg.train.init_strict = get<bool>(tr, "init_strict");
  cfg.train.resume = get<std::string>(tr, "resume");

  const json& ev = j.at("eval");
  cfg.eval.clip_len = get<int>(ev, "clip_len");
  const std::string feature = get<std::string>(ev, "feature");
  if (feature != "post_bn" && feature != "pre_bn")
    throw ConfigError(cat("eval.feature must be post_bn or pre_bn, got '", feature, "'"));
  cfg.eval.feature = feature == "post_bn" ? evalkit::FeatureSpace::post_bn : evalkit::FeatureSpace::pre_bn;
  const std::string metric = get<std::string>(ev, "metric");
  if (metric != "euclidean" && metric != "cosine")
    throw ConfigError(cat("eval.metric must be euclidean or cosine, got '", metric, "'"));
  cfg.eval.metric = metric == "euclidean" ? evalkit::Metric::euclidean : evalkit::Metric::cosine;
  cfg.eval.protocol = get<std::string>(ev, "protocol");
  cfg.eval.num_splits = get<int>(ev, "num_splits");
  cfg.eval.ranks = get<std::vector<int>>(ev, "ranks");
  cfg.eval.seed = cfg.train.seed;
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(cat("cannot read config file: ", path.string()));
  json overlay;
  try {
    in >> overlay;
  } catch (const json::exception& e) {
    throw ConfigError(cat("config file ", path.string(), ": ", e.what()));
  }
  json base = default_config_json();
  check_keys(overlay, base, "");
  deep_merge(base, overlay);
  return config_from_json(base);
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError(cat("override must look like key.path=value, got '", assignment, "'"));
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part))
      throw ConfigError(cat("unknown config key '", key, "'"));
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  // Parse the value as JSON when possible so numbers, bools and arrays work;
  // fall back to a plain string.
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;
  if (node->is_string() && !parsed.is_string()) parsed = value;
  *node = parsed;
}

}  // namespace vreid
