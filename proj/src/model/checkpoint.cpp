#include "vreid/model/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

namespace vreid::model {

namespace fs = std::filesystem;
using nlohmann::json;

static constexpr char kMagic[8] = {'V', 'R', 'E', 'I', 'D', 'C', 'K', '1'};

void write_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  json header = ckpt.meta;
  header["format_version"] = 1;
  json dir = json::array();
  std::int64_t offset = 0;
  for (const auto& [name, tensor] : ckpt.tensors) {
    dir.push_back({{"name", name}, {"shape", tensor.shape()}, {"offset", offset}});
    offset += tensor.size();
  }
  header["tensors"] = dir;

  const std::string header_text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(cat("cannot write checkpoint: ", path.string()));
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = header_text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_text.data(), static_cast<std::streamsize>(len));
  for (const auto& [name, tensor] : ckpt.tensors)
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.size() * static_cast<std::int64_t>(sizeof(Scalar))));
  if (!out) throw IoError(cat("failed writing checkpoint: ", path.string()));
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(cat("cannot read checkpoint: ", path.string()));
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw ValidationError(cat("not a checkpoint file: ", path.string()));
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header_text(len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError(cat("truncated checkpoint header: ", path.string()));

  Checkpoint ckpt;
  ckpt.meta = json::parse(header_text);
  if (ckpt.meta.value("format_version", 0) != 1)
    throw ValidationError(cat("unsupported checkpoint version in ", path.string()));

  for (const auto& entry : ckpt.meta.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * static_cast<std::int64_t>(sizeof(Scalar))));
    if (!in) throw IoError(cat("truncated checkpoint tensors: ", path.string()));
    ckpt.tensors.emplace(name, std::move(t));
  }
  ckpt.meta.erase("tensors");
  return ckpt;
}

Checkpoint snapshot_model(ReidModel& model) {
  Checkpoint ckpt;
  const auto& enc = model.encoder_spec();
  const auto& head = model.head_spec();
  ckpt.meta["encoder"] = {{"name", enc.name},
                          {"embed_dim", enc.embed_dim},
                          {"last_stride", enc.last_stride},
                          {"pretrained", enc.pretrained}};
  ckpt.meta["head"] = {{"num_classes", head.num_classes},
                       {"attn_reduce_dim", head.attn_reduce_dim},
                       {"temporal_kernel", head.temporal_kernel},
                       {"bnneck_before_dml", head.bnneck_before_dml}};
  for (auto& [name, p] : model.params()) ckpt.tensors.emplace(name, p->value);
  for (auto& [name, b] : model.buffers()) ckpt.tensors.emplace("buffer." + name, *b);
  return ckpt;
}

void load_into_model(ReidModel& model, const Checkpoint& ckpt, bool strict, std::ostream* log) {
  auto report = [&](const std::string& msg) {
    if (strict) throw ValidationError(cat("checkpoint load (strict): ", msg));
    if (log) *log << "checkpoint load: skipping " << msg << "\n";
  };

  bool classifier_mismatch = false;
  for (auto& [name, p] : model.params()) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) {
      report(cat(name, " (missing from checkpoint)"));
      continue;
    }
    if (!it->second.same_shape(p->value)) {
      if (name.rfind("classifier.", 0) == 0) classifier_mismatch = true;
      report(cat(name, " (shape ", shape_str(it->second.shape()), " vs ", shape_str(p->value.shape()), ")"));
      continue;
    }
    p->value = it->second;
  }
  for (auto& [name, b] : model.buffers()) {
    auto it = ckpt.tensors.find("buffer." + name);
    if (it == ckpt.tensors.end()) {
      report(cat("buffer.", name, " (missing from checkpoint)"));
      continue;
    }
    if (!it->second.same_shape(*b)) {
      report(cat("buffer.", name, " (shape mismatch)"));
      continue;
    }
    *b = it->second;
  }

  if (classifier_mismatch && !strict) {
    // Fresh Kaiming weights for a class count the checkpoint does not match.
    RandomSource rng(derive_seed(0xc1a55, {static_cast<std::uint64_t>(model.num_classes())}));
    model.reinit_classifier(rng);
    if (log) *log << "checkpoint load: classifier reinitialized for " << model.num_classes() << " classes\n";
  }
}

void init_from_checkpoint(ReidModel& model, const fs::path& path, bool strict, std::ostream* log) {
  if (!fs::exists(path)) throw IoError(cat("checkpoint file does not exist: ", path.string()));
  load_into_model(model, read_checkpoint(path), strict, log);
}

}  // namespace vreid::model
