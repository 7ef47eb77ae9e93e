#include "vreid/trainer/trainer.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

#include "vreid/data/sampling.hpp"
#include "vreid/data/synthetic.hpp"
#include "vreid/model/checkpoint.hpp"
#include "vreid/optim/optim.hpp"
#include "vreid/transforms/transforms.hpp"

namespace vreid::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FrameBatch {
  Tensor frames;        // (B, T, 3, H, W)
  std::vector<int> labels;
  Tensor erase_labels;  // (B, T)
};

FrameBatch assemble_batch(const std::vector<data::PkBatchStream::Entry>& entries, int clip_len,
                          const tfm::TransformConfig& train_tf, std::uint64_t seed, int epoch,
                          std::int64_t& clip_ordinal) {
  FrameBatch batch;
  const int b = static_cast<int>(entries.size());
  batch.frames = Tensor({b, clip_len, 3, train_tf.height, train_tf.width});
  batch.erase_labels = Tensor({b, clip_len});
  batch.labels.reserve(static_cast<std::size_t>(b));

  for (int i = 0; i < b; ++i) {
    const auto& [tracklet, label] = entries[static_cast<std::size_t>(i)];
    batch.labels.push_back(label);
    // Per-clip stream: results do not depend on loader parallelism.
    RandomSource clip_rng(derive_seed(seed, {0xc11b, static_cast<std::uint64_t>(epoch),
                                             static_cast<std::uint64_t>(clip_ordinal++)}));
    const data::Clip clip = data::sample_training_clip(*tracklet, clip_len, clip_rng);
    std::vector<cv::Mat> images;
    images.reserve(clip.frame_indices.size());
    for (int idx : clip.frame_indices)
      images.push_back(tfm::load_image(tracklet->frame_paths[static_cast<std::size_t>(idx)]));
    auto prepared = tfm::preprocess_clip(images, train_tf, clip_rng);
    for (int t = 0; t < clip_len; ++t) {
      batch.erase_labels(i, t) = prepared.erase_labels[static_cast<std::size_t>(t)];
      std::copy_n(prepared.frames.data() + static_cast<std::int64_t>(t) * 3 * train_tf.height * train_tf.width,
                  static_cast<std::int64_t>(3) * train_tf.height * train_tf.width,
                  batch.frames.data() +
                      (static_cast<std::int64_t>(i) * clip_len + t) * 3 * train_tf.height * train_tf.width);
    }
  }
  return batch;
}

json epoch_to_json(const EpochRecord& r) {
  return {{"type", "epoch"}, {"epoch", r.epoch},   {"lr", r.lr},       {"steps", r.steps},
          {"id", r.id},      {"rll", r.rll},       {"center", r.center}, {"erase", r.erase},
          {"total", r.total}};
}

EpochRecord epoch_from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.lr = j.at("lr").get<Scalar>();
  r.steps = j.at("steps").get<int>();
  r.id = j.at("id").get<Scalar>();
  r.rll = j.at("rll").get<Scalar>();
  r.center = j.at("center").get<Scalar>();
  r.erase = j.at("erase").get<Scalar>();
  r.total = j.at("total").get<Scalar>();
  return r;
}

json val_to_json(const ValRecord& r) {
  return {{"type", "validation"}, {"epoch", r.epoch}, {"rank1", r.rank1}, {"map", r.map_score}};
}

ValRecord val_from_json(const json& j) {
  ValRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.rank1 = j.at("rank1").get<double>();
  r.map_score = j.at("map").get<double>();
  return r;
}

}  // namespace

TrainResult train(const RunConfig& config) {
  config.validate();

  const fs::path out_dir = config.train.out_dir;
  fs::create_directories(out_dir);

  // Scan the dataset and fix the class count from the train split.
  data::TrackletIndex index = data::scan_dataset(config.dataset.root, config.dataset.layout);
  const int num_classes = index.num_train_ids();
  if (num_classes < 2) throw ConfigError(cat("training needs >= 2 identities, found ", num_classes));

  model::HeadSpec head = config.head;
  head.num_classes = num_classes;

  RunConfig effective = config;
  effective.head = head;
  {
    std::ofstream echo(out_dir / "config.json");
    echo << config_to_json(effective).dump(2) << "\n";
  }
  data::save_manifest(index, out_dir / "dataset_manifest.tsv");

  auto model_ptr = std::make_shared<model::ReidModel>(config.encoder, head,
                                                      derive_seed(config.train.seed, {0x1111}));
  model::ReidModel& model = *model_ptr;

  if (!config.encoder.pretrained.empty())
    model::init_from_checkpoint(model, config.encoder.pretrained, false, &std::cerr);
  if (!config.train.init_checkpoint.empty())
    model::init_from_checkpoint(model, config.train.init_checkpoint, config.train.init_strict, &std::cerr);

  auto centers_ptr = std::make_shared<loss::CenterBank>(num_classes, model.embed_dim(), config.center_lr);
  loss::CenterBank& centers = *centers_ptr;

  optim::Adam optimizer = optim::build_optimizer(model, config.schedule);

  tfm::TransformConfig train_tf = config.transform;
  train_tf.train = true;
  tfm::TransformConfig eval_tf = config.transform;
  eval_tf.train = false;

  evalkit::EvalConfig eval_cfg = config.eval;
  eval_cfg.seed = config.train.seed;

  TrainResult result;
  result.model = model_ptr;
  result.centers = centers_ptr;
  result.best_checkpoint = out_dir / "ckpt_best.bin";
  result.last_checkpoint = out_dir / "ckpt_last.bin";

  int start_epoch = 1;

  // Resume: restore parameters, buffers, optimizer moments, centers and the
  // logged history. All remaining randomness is a pure function of
  // (seed, epoch, ordinal), so the trajectory continues bit-for-bit.
  if (!config.train.resume.empty()) {
    model::Checkpoint ckpt = model::read_checkpoint(config.train.resume);
    model::load_into_model(model, ckpt, true);
    auto state = optimizer.state_buffers();
    for (auto& [name, tensor] : state) {
      auto it = ckpt.tensors.find(name);
      if (it == ckpt.tensors.end()) throw ValidationError(cat("resume: missing optimizer state ", name));
      *tensor = it->second;
    }
    optimizer.set_step_count(ckpt.meta.at("optim_steps").get<std::int64_t>());
    auto cit = ckpt.tensors.find("centers");
    if (cit == ckpt.tensors.end()) throw ValidationError("resume: missing center bank");
    centers.centers = cit->second;
    start_epoch = ckpt.meta.at("epoch").get<int>() + 1;
    for (const auto& h : ckpt.meta.at("history")) result.history.push_back(epoch_from_json(h));
    for (const auto& v : ckpt.meta.at("validations")) result.validations.push_back(val_from_json(v));
    result.best_rank1 = ckpt.meta.value("best_rank1", 0.0);
    result.best_epoch = ckpt.meta.value("best_epoch", 0);
    result.first_full_rank1_epoch = ckpt.meta.value("first_full_rank1_epoch", -1);
  }

  std::ofstream metrics_log(out_dir / "metrics.jsonl", std::ios::app);
  if (!metrics_log) throw IoError(cat("cannot open metrics log under ", out_dir.string()));

  data::PkBatchStream sampler(index, config.batch, config.train.seed);

  auto save_state = [&](const fs::path& path, int epoch) {
    model::Checkpoint ckpt = model::snapshot_model(model);
    ckpt.meta["epoch"] = epoch;
    ckpt.meta["num_classes"] = num_classes;
    ckpt.meta["optim_steps"] = optimizer.step_count();
    ckpt.meta["rng"] = {{"seed", config.train.seed},
                        {"note", "streams derive from (seed, epoch, ordinal); no free-running state"}};
    json hist = json::array();
    for (const auto& h : result.history) hist.push_back(epoch_to_json(h));
    ckpt.meta["history"] = hist;
    json vals = json::array();
    for (const auto& v : result.validations) vals.push_back(val_to_json(v));
    ckpt.meta["validations"] = vals;
    ckpt.meta["best_rank1"] = result.best_rank1;
    ckpt.meta["best_epoch"] = result.best_epoch;
    ckpt.meta["first_full_rank1_epoch"] = result.first_full_rank1_epoch;
    for (auto& [name, tensor] : optimizer.state_buffers()) ckpt.tensors.emplace(name, *tensor);
    ckpt.tensors.emplace("centers", centers.centers);
    model::write_checkpoint(path, ckpt);
  };

  for (int epoch = start_epoch; epoch <= config.schedule.total_epochs; ++epoch) {
    const Scalar lr = optim::lr_at_epoch(epoch, config.schedule);
    optimizer.set_lr(lr);

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;

    std::int64_t clip_ordinal = 0;
    const auto batches = sampler.epoch_batches(epoch, config.train.rounds_per_epoch);
    for (std::size_t step = 0; step < batches.size(); ++step) {
      FrameBatch batch = assemble_batch(batches[step], config.clip_len, train_tf, config.train.seed,
                                        epoch, clip_ordinal);

      auto out = model.forward(batch.frames, true);
      const Tensor& dml_feat = model.dml_features(out);

      auto id = loss::id_loss(out.logits, batch.labels, config.loss_weights.epsilon);
      auto rll = loss::rll_loss(dml_feat, batch.labels, config.rll);
      auto center = loss::center_loss(dml_feat, batch.labels, centers);
      auto erase = loss::erase_attention_loss(out.scores, batch.erase_labels);

      const Scalar erase_sign = config.loss_weights.negate_erase ? -1.0 : 1.0;
      loss::LossBundle bundle;
      try {
        bundle = loss::total_loss(id.value, rll.value, center.value, erase_sign * erase.value,
                                  config.loss_weights);
      } catch (const NumericError& e) {
        throw NumericError(cat(e.what(), " (epoch ", epoch, ", step ", step + 1, ")"));
      }

      // Combined gradient on the metric-loss features: RLL plus beta-weighted
      // center pull.
      Tensor ddml = rll.grad;
      for (std::int64_t i = 0; i < ddml.size(); ++i)
        ddml.data()[i] += config.loss_weights.beta * center.grad.data()[i];
      Tensor dscores = erase.grad;
      if (erase_sign < 0.0) dscores.scale_(-1.0);

      optimizer.zero_grad();
      model.backward(id.grad, ddml, dscores);
      optimizer.step();
      loss::update_centers(centers, dml_feat, batch.labels);

      metrics_log << json({{"type", "step"},
                           {"epoch", epoch},
                           {"step", step + 1},
                           {"lr", lr},
                           {"id", bundle.id},
                           {"rll", bundle.rll},
                           {"center", bundle.center},
                           {"erase", bundle.erase_attn},
                           {"total", bundle.total}})
                         .dump()
                  << "\n";

      record.id += bundle.id;
      record.rll += bundle.rll;
      record.center += bundle.center;
      record.erase += bundle.erase_attn;
      record.total += bundle.total;
      ++record.steps;
    }

    const Scalar inv = record.steps > 0 ? 1.0 / record.steps : 0.0;
    record.id *= inv;
    record.rll *= inv;
    record.center *= inv;
    record.erase *= inv;
    record.total *= inv;
    result.history.push_back(record);
    metrics_log << epoch_to_json(record).dump() << "\n";

    if (epoch % config.train.val_cadence == 0) {
      auto report = evalkit::run_protocol(index, model, eval_tf, eval_cfg);
      ValRecord val;
      val.epoch = epoch;
      val.rank1 = report.cmc.count(1) ? report.cmc.at(1) : 0.0;
      val.map_score = report.map_score;
      result.validations.push_back(val);
      metrics_log << val_to_json(val).dump() << "\n";

      if (val.rank1 >= 1.0 && result.first_full_rank1_epoch < 0) result.first_full_rank1_epoch = epoch;
      if (val.rank1 > result.best_rank1 || result.best_epoch == 0) {
        result.best_rank1 = val.rank1;
        result.best_epoch = epoch;
        save_state(result.best_checkpoint, epoch);
      }
    }
    save_state(result.last_checkpoint, epoch);
  }

  return result;
}

}  // namespace vreid::train
