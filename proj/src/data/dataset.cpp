#include "vreid/data/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace vreid::data {

namespace fs = std::filesystem;

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::query: return "query";
    case Split::gallery: return "gallery";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "query") return Split::query;
  if (name == "gallery") return Split::gallery;
  throw ValidationError(cat("unknown split name '", name, "'"));
}

std::vector<const TrackletRecord*> TrackletIndex::split(Split s) const {
  std::vector<const TrackletRecord*> out;
  for (const auto& t : tracklets)
    if (t.split == s) out.push_back(&t);
  return out;
}

std::vector<int> TrackletIndex::split_person_ids(Split s) const {
  std::set<int> ids;
  for (const auto& t : tracklets)
    if (t.split == s) ids.insert(t.person_id);
  return std::vector<int>(ids.begin(), ids.end());
}

void TrackletIndex::build_label_map() {
  train_labels_.clear();
  for (int pid : split_person_ids(Split::train))
    train_labels_.emplace(pid, static_cast<int>(train_labels_.size()));
}

int TrackletIndex::train_label(int person_id) const {
  auto it = train_labels_.find(person_id);
  if (it == train_labels_.end())
    throw ValidationError(cat("person id ", person_id, " is not in the train split"));
  return it->second;
}

// ---------------------------------------------------------------------------
// Scanning helpers
// ---------------------------------------------------------------------------

static std::vector<fs::path> sorted_entries(const fs::path& dir, bool dirs_only) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (dirs_only && !e.is_directory()) continue;
    if (!dirs_only && !e.is_regular_file()) continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

static bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

static void check_readable(const fs::path& p) {
  std::error_code ec;
  const auto size = fs::file_size(p, ec);
  if (ec || size == 0)
    throw ValidationError(cat("unreadable image file: ", p.string()));
}

static std::vector<std::string> collect_frames(const fs::path& dir) {
  std::vector<std::string> frames;
  for (const auto& p : sorted_entries(dir, false)) {
    if (!is_image_file(p)) continue;
    check_readable(p);
    frames.push_back(p.string());
  }
  if (frames.empty()) throw ValidationError(cat("empty tracklet directory: ", dir.string()));
  return frames;
}

static int parse_int_dir(const fs::path& p, const char* what) {
  const std::string name = p.filename().string();
  try {
    std::size_t pos = 0;
    int v = std::stoi(name, &pos);
    if (pos != name.size()) throw std::invalid_argument(name);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(cat("expected numeric ", what, " directory, got: ", p.string()));
  }
}

// Trailing integer of names like "person_0007" or "person012".
static int trailing_number(const std::string& name, const fs::path& ctx) {
  int i = static_cast<int>(name.size());
  while (i > 0 && std::isdigit(static_cast<unsigned char>(name[static_cast<std::size_t>(i - 1)]))) --i;
  if (i == static_cast<int>(name.size()))
    throw ValidationError(cat("expected a numeric suffix in directory name: ", ctx.string()));
  return std::stoi(name.substr(static_cast<std::size_t>(i)));
}

static std::string make_key(int pid, int cam, int ordinal) {
  std::ostringstream os;
  os << pid << "_c" << cam << "_t" << ordinal;
  return os.str();
}

// ---------------------------------------------------------------------------
// Layout: synthetic  root/<id>/<cam>/<tracklet>/<frame>.png, all train.
// ---------------------------------------------------------------------------

static void scan_synthetic(const fs::path& root, TrackletIndex& index) {
  for (const auto& id_dir : sorted_entries(root, true)) {
    const int pid = parse_int_dir(id_dir, "person id");
    for (const auto& cam_dir : sorted_entries(id_dir, true)) {
      const int cam = parse_int_dir(cam_dir, "camera");
      int ordinal = 0;
      for (const auto& tr_dir : sorted_entries(cam_dir, true)) {
        TrackletRecord rec;
        rec.person_id = pid;
        rec.camera_id = cam;
        rec.frame_paths = collect_frames(tr_dir);
        rec.split = Split::train;
        rec.key = make_key(pid, cam, ordinal++);
        index.tracklets.push_back(std::move(rec));
      }
      if (ordinal == 0) throw ValidationError(cat("camera directory has no tracklets: ", cam_dir.string()));
    }
  }
}

// ---------------------------------------------------------------------------
// Layout: mars
//   root/bbox_train/<pppp>/ppppCcTttttFfff.jpg  -> train
//   root/bbox_test/<pppp>/...                   -> gallery ("00-1" junk skipped)
//   root/info/query.txt (optional): one ppppCcTtttt key per line -> query
// ---------------------------------------------------------------------------

struct MarsFrame {
  int tracklet;
  int frame;
  std::string path;
};

static bool parse_mars_name(const std::string& stem, int& cam, int& tracklet, int& frame) {
  // e.g. 0001C1T0001F001
  if (stem.size() < 12) return false;
  const std::size_t cpos = stem.find('C', 4);
  if (cpos == std::string::npos) return false;
  const std::size_t tpos = stem.find('T', cpos);
  const std::size_t fpos = stem.find('F', cpos);
  if (tpos == std::string::npos || fpos == std::string::npos || fpos < tpos) return false;
  try {
    cam = std::stoi(stem.substr(cpos + 1, tpos - cpos - 1));
    tracklet = std::stoi(stem.substr(tpos + 1, fpos - tpos - 1));
    frame = std::stoi(stem.substr(fpos + 1));
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

static void scan_mars_half(const fs::path& half, Split split, TrackletIndex& index) {
  for (const auto& pid_dir : sorted_entries(half, true)) {
    const std::string pid_name = pid_dir.filename().string();
    if (pid_name == "00-1") continue;  // junk tracklets are dropped from the protocol
    int pid = 0;
    try {
      pid = std::stoi(pid_name);
    } catch (const std::exception&) {
      throw ValidationError(cat("expected 4-digit person directory, got: ", pid_dir.string()));
    }
    // (cam, tracklet) -> frames
    std::map<std::pair<int, int>, std::vector<MarsFrame>> groups;
    for (const auto& img : sorted_entries(pid_dir, false)) {
      if (!is_image_file(img)) continue;
      check_readable(img);
      int cam = 0, tr = 0, fr = 0;
      if (!parse_mars_name(img.stem().string(), cam, tr, fr))
        throw ValidationError(cat("file name does not follow the MARS convention: ", img.string()));
      groups[{cam, tr}].push_back({tr, fr, img.string()});
    }
    if (groups.empty()) throw ValidationError(cat("empty person directory: ", pid_dir.string()));
    for (auto& [cam_tr, frames] : groups) {
      std::sort(frames.begin(), frames.end(),
                [](const MarsFrame& a, const MarsFrame& b) { return a.frame < b.frame; });
      TrackletRecord rec;
      rec.person_id = pid;
      rec.camera_id = cam_tr.first;
      rec.split = split;
      for (auto& f : frames) rec.frame_paths.push_back(std::move(f.path));
      char key[32];
      std::snprintf(key, sizeof(key), "%sC%dT%04d", pid_name.c_str(), cam_tr.first, cam_tr.second);
      rec.key = key;
      index.tracklets.push_back(std::move(rec));
    }
  }
}

static void scan_mars(const fs::path& root, TrackletIndex& index) {
  const fs::path train = root / "bbox_train";
  const fs::path test = root / "bbox_test";
  if (!fs::exists(train) && !fs::exists(test))
    throw ValidationError(cat("mars layout needs bbox_train/ or bbox_test/ under ", root.string()));
  if (fs::exists(train)) scan_mars_half(train, Split::train, index);
  if (fs::exists(test)) scan_mars_half(test, Split::gallery, index);

  const fs::path query_list = root / "info" / "query.txt";
  if (fs::exists(query_list)) {
    std::ifstream in(query_list);
    std::set<std::string> keys;
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (!line.empty()) keys.insert(line);
    }
    for (auto& t : index.tracklets)
      if (t.split == Split::gallery && keys.count(t.key)) t.split = Split::query;
  }
}

// ---------------------------------------------------------------------------
// Layout: prid2011   root/multi_shot/cam_a|cam_b/person_XXXX/*.png
// Layout: ilids-vid  root/sequences/cam1|cam2/personXXX/*.png
// All tracklets are train; the evaluation protocol draws random half splits.
// ---------------------------------------------------------------------------

static void scan_two_camera(const fs::path& base, const std::vector<std::string>& cam_names,
                            TrackletIndex& index) {
  if (!fs::exists(base)) throw ValidationError(cat("missing directory: ", base.string()));
  for (std::size_t ci = 0; ci < cam_names.size(); ++ci) {
    const fs::path cam_dir = base / cam_names[ci];
    if (!fs::exists(cam_dir)) throw ValidationError(cat("missing camera directory: ", cam_dir.string()));
    for (const auto& person_dir : sorted_entries(cam_dir, true)) {
      TrackletRecord rec;
      rec.person_id = trailing_number(person_dir.filename().string(), person_dir);
      rec.camera_id = static_cast<int>(ci);
      rec.frame_paths = collect_frames(person_dir);
      rec.split = Split::train;
      rec.key = make_key(rec.person_id, rec.camera_id, 0);
      index.tracklets.push_back(std::move(rec));
    }
  }
}

// ---------------------------------------------------------------------------

TrackletIndex scan_dataset(const fs::path& root, const std::string& layout) {
  if (!fs::exists(root)) throw IoError(cat("dataset root does not exist: ", root.string()));
  if (!fs::is_directory(root)) throw IoError(cat("dataset root is not a directory: ", root.string()));

  TrackletIndex index;
  index.root = root.string();
  index.layout = layout;

  if (layout == "synthetic") {
    scan_synthetic(root, index);
  } else if (layout == "mars") {
    scan_mars(root, index);
  } else if (layout == "prid2011") {
    scan_two_camera(root / "multi_shot", {"cam_a", "cam_b"}, index);
  } else if (layout == "ilids-vid") {
    scan_two_camera(root / "sequences", {"cam1", "cam2"}, index);
  } else {
    throw ValidationError(cat("unknown dataset layout '", layout,
                              "' (expected mars, prid2011, ilids-vid or synthetic)"));
  }

  if (index.tracklets.empty()) throw ValidationError(cat("no tracklets found under ", root.string()));
  index.build_label_map();
  return index;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

void save_manifest(const TrackletIndex& index, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(cat("cannot write manifest: ", path.string()));
  out << "# vreid manifest v1: id\tcam\tsplit\tkey\tframe paths...\n";
  out << "# layout: " << index.layout << "\troot: " << index.root << "\n";
  for (const auto& t : index.tracklets) {
    out << t.person_id << '\t' << t.camera_id << '\t' << split_name(t.split) << '\t' << t.key;
    for (const auto& f : t.frame_paths) out << '\t' << f;
    out << '\n';
  }
}

TrackletIndex load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(cat("cannot read manifest: ", path.string()));
  TrackletIndex index;
  index.root = path.string();
  index.layout = "manifest";
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(is, field, '\t')) fields.push_back(field);
    if (fields.size() < 5)
      throw ValidationError(cat("manifest line ", lineno, ": expected id, cam, split, key and frames"));
    TrackletRecord rec;
    rec.person_id = std::stoi(fields[0]);
    rec.camera_id = std::stoi(fields[1]);
    rec.split = split_from_name(fields[2]);
    rec.key = fields[3];
    rec.frame_paths.assign(fields.begin() + 4, fields.end());
    index.tracklets.push_back(std::move(rec));
  }
  if (index.tracklets.empty()) throw ValidationError(cat("manifest has no records: ", path.string()));
  index.build_label_map();
  return index;
}

}  // namespace vreid::data
