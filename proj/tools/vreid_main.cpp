#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <vector>

#include "vreid/config.hpp"
#include "vreid/data/synthetic.hpp"
#include "vreid/model/checkpoint.hpp"
#include "vreid/trainer/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool deterministic = false;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Run config file (JSON)");
  cmd->add_option("--set", opts.overrides, "Override a config key, e.g. --set schedule.base_lr=0.0007");
  cmd->add_option("--seed", opts.seed, "Override train.seed")->each([&](const std::string&) {
    opts.seed_set = true;
  });
  cmd->add_flag("--deterministic", opts.deterministic, "Force deterministic mode");
  cmd->add_option("--out", opts.out_dir, "Override train.out_dir");
}

vreid::RunConfig resolve_config(const CommonOpts& opts) {
  json effective = vreid::default_config_json();
  if (!opts.config_path.empty()) {
    // load_config validates keys and merges over the defaults
    effective = vreid::config_to_json(vreid::load_config(opts.config_path));
  }
  for (const auto& assignment : opts.overrides) vreid::apply_override(effective, assignment);
  if (opts.seed_set) effective["train"]["seed"] = opts.seed;
  if (opts.deterministic) effective["train"]["deterministic"] = true;
  if (!opts.out_dir.empty()) effective["train"]["out_dir"] = opts.out_dir;
  return vreid::config_from_json(effective);
}

vreid::model::ReidModel model_from_checkpoint(const fs::path& path) {
  auto ckpt = vreid::model::read_checkpoint(path);
  vreid::model::FrameEncoderSpec enc;
  enc.name = ckpt.meta.at("encoder").at("name").get<std::string>();
  enc.embed_dim = ckpt.meta.at("encoder").at("embed_dim").get<int>();
  enc.last_stride = ckpt.meta.at("encoder").at("last_stride").get<int>();
  vreid::model::HeadSpec head;
  head.num_classes = ckpt.meta.at("head").at("num_classes").get<int>();
  head.attn_reduce_dim = ckpt.meta.at("head").at("attn_reduce_dim").get<int>();
  head.temporal_kernel = ckpt.meta.at("head").at("temporal_kernel").get<int>();
  head.bnneck_before_dml = ckpt.meta.at("head").at("bnneck_before_dml").get<bool>();
  vreid::model::ReidModel model(enc, head, 0);
  vreid::model::load_into_model(model, ckpt, true);
  return model;
}

int cmd_train(const CommonOpts& opts) {
  auto cfg = resolve_config(opts);
  auto result = vreid::train::train(cfg);
  std::cout << "training finished: " << result.history.size() << " epochs, best rank-1 "
            << result.best_rank1 << " at epoch " << result.best_epoch << "\n";
  std::cout << "checkpoints: " << result.last_checkpoint.string() << " (last), "
            << result.best_checkpoint.string() << " (best)\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint) {
  auto cfg = resolve_config(opts);
  auto model = model_from_checkpoint(checkpoint);
  auto index = vreid::data::scan_dataset(cfg.dataset.root, cfg.dataset.layout);
  vreid::tfm::TransformConfig eval_tf = cfg.transform;
  eval_tf.train = false;
  cfg.eval.seed = cfg.train.seed;
  auto report = vreid::evalkit::run_protocol(index, model, eval_tf, cfg.eval);
  std::cout << report.table();
  if (!cfg.train.out_dir.empty()) {
    fs::create_directories(cfg.train.out_dir);
    std::ofstream txt(fs::path(cfg.train.out_dir) / "eval_report.txt");
    txt << report.table();
    json j = report.protocol();
    j["map"] = report.map_score;
    for (const auto& [r, v] : report.cmc) j["cmc"][std::to_string(r)] = v;
    std::ofstream js(fs::path(cfg.train.out_dir) / "eval_report.json");
    js << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_extract(const CommonOpts& opts, const std::string& checkpoint, const std::string& split_name,
                const std::string& out_base) {
  auto cfg = resolve_config(opts);
  auto model = model_from_checkpoint(checkpoint);
  auto index = vreid::data::scan_dataset(cfg.dataset.root, cfg.dataset.layout);
  vreid::tfm::TransformConfig eval_tf = cfg.transform;
  eval_tf.train = false;

  std::vector<const vreid::data::TrackletRecord*> records;
  if (split_name == "all") {
    for (const auto& t : index.tracklets) records.push_back(&t);
  } else {
    records = index.split(vreid::data::split_from_name(split_name));
  }
  if (records.empty()) throw vreid::ValidationError(vreid::cat("no tracklets in split '", split_name, "'"));

  std::vector<vreid::evalkit::VideoFeature> features;
  features.reserve(records.size());
  for (const auto* rec : records)
    features.push_back(vreid::evalkit::extract_video_feature(*rec, model, cfg.eval.clip_len, eval_tf,
                                                             cfg.eval.feature));
  vreid::evalkit::dump_features(out_base, features);
  std::cout << "wrote " << features.size() << " video features to " << out_base << ".bin/.tsv\n";
  return 0;
}

int cmd_synth(const std::string& root, const vreid::data::SyntheticSpec& spec) {
  vreid::data::generate_synthetic(root, spec);
  std::cout << "synthetic dataset at " << root << ": " << spec.num_ids << " ids x " << spec.cams
            << " cams x " << spec.tracklets_per << " tracklets x " << spec.frames_per << " frames\n";
  return 0;
}

int cmd_params(const CommonOpts& opts) {
  auto cfg = resolve_config(opts);
  vreid::model::HeadSpec head = cfg.head;
  // Use the dataset's class count when it is present; otherwise the
  // configured head.num_classes stands in.
  if (!cfg.dataset.root.empty() && fs::exists(cfg.dataset.root)) {
    auto index = vreid::data::scan_dataset(cfg.dataset.root, cfg.dataset.layout);
    if (index.num_train_ids() >= 2) head.num_classes = index.num_train_ids();
  }
  vreid::model::ReidModel model(cfg.encoder, head, cfg.train.seed);
  std::cout << vreid::model::param_report(model).table();
  return 0;
}

// Renders metrics.jsonl into a text table and an SVG of the loss curves.
int cmd_report(const std::string& run_dir) {
  const fs::path dir = run_dir;
  const fs::path log_path = dir / "metrics.jsonl";
  std::ifstream in(log_path);
  if (!in) throw vreid::IoError(vreid::cat("cannot read metrics log: ", log_path.string()));

  std::vector<json> epochs, validations;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;
    const std::string type = j.value("type", "");
    if (type == "epoch") epochs.push_back(j);
    if (type == "validation") validations.push_back(j);
  }
  if (epochs.empty()) throw vreid::ValidationError("metrics log has no epoch records");

  std::ofstream txt(dir / "report.txt");
  txt << "epoch        lr        id       rll    center     erase     total\n";
  char buf[160];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof(buf), "%5d %9.2e %9.4f %9.4f %9.4f %9.4f %9.4f\n", e["epoch"].get<int>(),
                  e["lr"].get<double>(), e["id"].get<double>(), e["rll"].get<double>(),
                  e["center"].get<double>(), e["erase"].get<double>(), e["total"].get<double>());
    txt << buf;
  }
  if (!validations.empty()) {
    txt << "\nvalidations (epoch, rank-1, mAP):\n";
    for (const auto& v : validations) {
      std::snprintf(buf, sizeof(buf), "%5d %9.4f %9.4f\n", v["epoch"].get<int>(),
                    v["rank1"].get<double>(), v["map"].get<double>());
      txt << buf;
    }
  }

  // Loss curves as a simple SVG polyline plot.
  const int width = 720, height = 400, margin = 45;
  double max_loss = 1e-9;
  for (const auto& e : epochs) max_loss = std::max(max_loss, e["total"].get<double>());
  const int n = static_cast<int>(epochs.size());
  auto x_of = [&](int i) {
    return margin + (n > 1 ? (width - 2 * margin) * static_cast<double>(i) / (n - 1) : 0.0);
  };
  auto y_of = [&](double v) { return height - margin - (height - 2 * margin) * v / max_loss; };

  std::ofstream svg(dir / "loss_curves.svg");
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin << "' y2='"
      << height - margin << "' stroke='black'/>\n";
  svg << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='" << height - margin
      << "' stroke='black'/>\n";
  const std::map<std::string, std::string> series{
      {"total", "#d62728"}, {"id", "#1f77b4"}, {"rll", "#2ca02c"}, {"erase", "#9467bd"}};
  int legend_y = margin;
  for (const auto& [key, color] : series) {
    svg << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (int i = 0; i < n; ++i)
      svg << x_of(i) << "," << y_of(epochs[static_cast<std::size_t>(i)][key].get<double>()) << " ";
    svg << "'/>\n";
    svg << "<text x='" << width - margin + 4 << "' y='" << legend_y << "' font-size='12' fill='" << color
        << "'>" << key << "</text>\n";
    legend_y += 16;
  }
  svg << "<text x='" << width / 2 << "' y='" << height - 8 << "' font-size='12'>epoch</text>\n";
  svg << "</svg>\n";

  std::cout << "wrote " << (dir / "report.txt").string() << " and " << (dir / "loss_curves.svg").string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vreid: video person re-identification toolkit"};
  app.require_subcommand(1);

  CommonOpts train_opts, eval_opts, extract_opts, params_opts;
  std::string eval_ckpt, extract_ckpt, extract_split = "all", extract_out = "features";
  std::string synth_root = "synthetic_data", report_dir = "runs/default";
  vreid::data::SyntheticSpec synth_spec;

  auto* train_cmd = app.add_subcommand("train", "Train a model from a run config");
  add_common(train_cmd, train_opts);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint with the dataset protocol");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();

  auto* extract_cmd = app.add_subcommand("extract", "Dump video features for a split");
  add_common(extract_cmd, extract_opts);
  extract_cmd->add_option("--checkpoint", extract_ckpt, "Checkpoint file")->required();
  extract_cmd->add_option("--split", extract_split, "train | query | gallery | all");
  extract_cmd->add_option("--features-out", extract_out, "Output base path (.bin/.tsv appended)");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--root", synth_root, "Output directory")->required();
  synth_cmd->add_option("--ids", synth_spec.num_ids, "Number of identities");
  synth_cmd->add_option("--cams", synth_spec.cams, "Cameras per identity");
  synth_cmd->add_option("--tracklets", synth_spec.tracklets_per, "Tracklets per (id, cam)");
  synth_cmd->add_option("--frames", synth_spec.frames_per, "Frames per tracklet");
  synth_cmd->add_option("--height", synth_spec.height, "Image height");
  synth_cmd->add_option("--width", synth_spec.width, "Image width");
  synth_cmd->add_option("--seed", synth_spec.seed, "Generator seed");

  auto* report_cmd = app.add_subcommand("report", "Render a run's metrics log to tables and plots");
  report_cmd->add_option("--run", report_dir, "Run directory containing metrics.jsonl")->required();

  auto* params_cmd = app.add_subcommand("params", "Print the model parameter-count table");
  add_common(params_cmd, params_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_opts);
    if (eval_cmd->parsed()) return cmd_eval(eval_opts, eval_ckpt);
    if (extract_cmd->parsed()) return cmd_extract(extract_opts, extract_ckpt, extract_split, extract_out);
    if (synth_cmd->parsed()) return cmd_synth(synth_root, synth_spec);
    if (report_cmd->parsed()) return cmd_report(report_dir);
    if (params_cmd->parsed()) return cmd_params(params_opts);
  } catch (const vreid::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
