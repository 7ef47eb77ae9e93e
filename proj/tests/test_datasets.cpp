#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "helpers.hpp"
#include "vreid/data/dataset.hpp"
#include "vreid/data/sampling.hpp"
#include "vreid/data/synthetic.hpp"

using namespace vreid;
using namespace vreid::data;
using testutil::TempDir;

namespace {

SyntheticSpec small_spec(int ids = 8, int cams = 2, int tracklets = 1, int frames = 4) {
  SyntheticSpec spec;
  spec.num_ids = ids;
  spec.cams = cams;
  spec.tracklets_per = tracklets;
  spec.frames_per = frames;
  spec.height = 16;
  spec.width = 8;
  spec.seed = 21;
  return spec;
}

TrackletRecord fake_tracklet(int frames, int pid = 0, int cam = 0) {
  TrackletRecord rec;
  rec.person_id = pid;
  rec.camera_id = cam;
  rec.key = "fake";
  for (int i = 0; i < frames; ++i) rec.frame_paths.push_back("frame" + std::to_string(i));
  return rec;
}

std::uint64_t hash_tree(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    char c;
    while (in.get(c)) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  }
  return h;
}

}  // namespace

TEST_CASE("synthetic generator writes the expected tree and scan finds it") {
  TempDir dir("synth");
  generate_synthetic(dir.path(), small_spec());

  auto index = scan_dataset(dir.path(), "synthetic");
  CHECK(index.tracklets.size() == 16);  // 8 ids x 2 cams x 1 tracklet
  int images = 0;
  for (const auto& t : index.tracklets) images += t.length();
  CHECK(images == 64);
  CHECK(index.num_train_ids() == 8);
  for (const auto& t : index.tracklets) CHECK(t.split == Split::train);
}

TEST_CASE("synthetic generator is deterministic byte for byte") {
  TempDir a("synth_a"), b("synth_b");
  generate_synthetic(a.path(), small_spec(3, 2, 1, 3));
  generate_synthetic(b.path(), small_spec(3, 2, 1, 3));
  CHECK(hash_tree(a.path()) == hash_tree(b.path()));
}

TEST_CASE("synthetic generator rejects bad counts") {
  TempDir dir("synth_bad");
  auto spec = small_spec();
  spec.num_ids = 0;
  CHECK_THROWS_AS(generate_synthetic(dir.path(), spec), ValidationError);
}

TEST_CASE("synthetic generator reports unwritable roots") {
  CHECK_THROWS_AS(generate_synthetic("/proc/vreid_test_unwritable", small_spec(1, 1, 1, 1)), IoError);
}

TEST_CASE("scan is pure: two scans agree") {
  TempDir dir("synth_pure");
  generate_synthetic(dir.path(), small_spec(4, 2, 1, 3));
  auto a = scan_dataset(dir.path(), "synthetic");
  auto b = scan_dataset(dir.path(), "synthetic");
  REQUIRE(a.tracklets.size() == b.tracklets.size());
  for (std::size_t i = 0; i < a.tracklets.size(); ++i) {
    CHECK(a.tracklets[i].person_id == b.tracklets[i].person_id);
    CHECK(a.tracklets[i].camera_id == b.tracklets[i].camera_id);
    CHECK(a.tracklets[i].frame_paths == b.tracklets[i].frame_paths);
  }
}

TEST_CASE("scan reports missing root and unreadable images") {
  CHECK_THROWS_AS(scan_dataset("/nonexistent/path", "synthetic"), IoError);

  TempDir dir("synth_broken");
  generate_synthetic(dir.path(), small_spec(2, 1, 1, 2));
  const auto victim = dir.path() / "0001" / "0" / "000" / "frame_00001.png";
  std::ofstream(victim, std::ios::trunc).close();  // zero-byte file
  try {
    scan_dataset(dir.path(), "synthetic");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(victim.string()) != std::string::npos);
  }
}

TEST_CASE("scan rejects empty tracklet directories") {
  TempDir dir("synth_empty");
  generate_synthetic(dir.path(), small_spec(2, 1, 1, 2));
  const auto extra = dir.path() / "0001" / "0" / "001";
  std::filesystem::create_directories(extra);
  CHECK_THROWS_AS(scan_dataset(dir.path(), "synthetic"), ValidationError);
}

TEST_CASE("unknown layout is rejected") {
  TempDir dir("layout");
  CHECK_THROWS_AS(scan_dataset(dir.path(), "nope"), ValidationError);
}

TEST_CASE("mars layout groups by the naming convention") {
  TempDir dir("mars");
  auto write_img = [&](const std::filesystem::path& p) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << "fakejpegbytes";
  };
  write_img(dir.path() / "bbox_train" / "0001" / "0001C1T0001F001.jpg");
  write_img(dir.path() / "bbox_train" / "0001" / "0001C1T0001F002.jpg");
  write_img(dir.path() / "bbox_train" / "0001" / "0001C2T0001F001.jpg");
  write_img(dir.path() / "bbox_train" / "0002" / "0002C1T0001F001.jpg");
  write_img(dir.path() / "bbox_test" / "0003" / "0003C1T0001F001.jpg");
  write_img(dir.path() / "bbox_test" / "0003" / "0003C2T0002F001.jpg");
  write_img(dir.path() / "bbox_test" / "00-1" / "00-1C1T0001F001.jpg");  // junk, skipped
  std::filesystem::create_directories(dir.path() / "info");
  std::ofstream(dir.path() / "info" / "query.txt") << "0003C1T0001\n";

  auto index = scan_dataset(dir.path(), "mars");
  CHECK(index.tracklets.size() == 5);

  std::map<std::string, const TrackletRecord*> by_key;
  for (const auto& t : index.tracklets) by_key[t.key] = &t;
  REQUIRE(by_key.count("0001C1T0001"));
  CHECK(by_key["0001C1T0001"]->length() == 2);
  CHECK(by_key["0001C1T0001"]->split == Split::train);
  CHECK(by_key["0001C1T0001"]->camera_id == 1);
  REQUIRE(by_key.count("0003C1T0001"));
  CHECK(by_key["0003C1T0001"]->split == Split::query);
  CHECK(by_key["0003C2T0002"]->split == Split::gallery);
  CHECK(index.num_train_ids() == 2);
}

TEST_CASE("prid2011 and ilids-vid layouts scan both cameras") {
  TempDir dir("prid");
  auto write_img = [&](const std::filesystem::path& p) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << "fakepngbytes";
  };
  for (const char* cam : {"cam_a", "cam_b"})
    for (int pid = 1; pid <= 3; ++pid)
      for (int f = 0; f < 2; ++f)
        write_img(dir.path() / "multi_shot" / cam /
                  ("person_" + std::string(pid < 10 ? "000" : "00") + std::to_string(pid)) /
                  ("img_" + std::to_string(f) + ".png"));
  auto prid = scan_dataset(dir.path(), "prid2011");
  CHECK(prid.tracklets.size() == 6);
  std::set<int> cams;
  for (const auto& t : prid.tracklets) cams.insert(t.camera_id);
  CHECK(cams == std::set<int>{0, 1});

  TempDir dir2("ilids");
  for (const char* cam : {"cam1", "cam2"})
    for (int pid = 1; pid <= 2; ++pid)
      write_img(dir2.path() / "sequences" / cam / ("person00" + std::to_string(pid)) / "img_0.png");
  auto ilids = scan_dataset(dir2.path(), "ilids-vid");
  CHECK(ilids.tracklets.size() == 4);
}

TEST_CASE("manifest round-trips the index") {
  TempDir dir("manifest");
  generate_synthetic(dir.path() / "data", small_spec(3, 2, 1, 2));
  auto index = scan_dataset(dir.path() / "data", "synthetic");
  save_manifest(index, dir.path() / "index.tsv");
  auto loaded = load_manifest(dir.path() / "index.tsv");
  REQUIRE(loaded.tracklets.size() == index.tracklets.size());
  for (std::size_t i = 0; i < index.tracklets.size(); ++i) {
    CHECK(loaded.tracklets[i].person_id == index.tracklets[i].person_id);
    CHECK(loaded.tracklets[i].camera_id == index.tracklets[i].camera_id);
    CHECK(loaded.tracklets[i].split == index.tracklets[i].split);
    CHECK(loaded.tracklets[i].frame_paths == index.tracklets[i].frame_paths);
  }
}

TEST_CASE("sample_training_clip covers the contract") {
  RandomSource rng(1);
  auto exact = fake_tracklet(4);
  auto clip = sample_training_clip(exact, 4, rng);
  CHECK(clip.frame_indices == std::vector<int>{0, 1, 2, 3});

  auto longer = fake_tracklet(100);
  RandomSource rng_a(42), rng_b(42);
  auto a = sample_training_clip(longer, 4, rng_a);
  auto b = sample_training_clip(longer, 4, rng_b);
  CHECK(a.frame_indices == b.frame_indices);  // reproducible
  std::set<int> unique(a.frame_indices.begin(), a.frame_indices.end());
  CHECK(unique.size() == 4);  // distinct
  CHECK(std::is_sorted(a.frame_indices.begin(), a.frame_indices.end()));

  auto shorter = fake_tracklet(2);
  auto c = sample_training_clip(shorter, 4, rng);
  CHECK(c.frame_indices.size() == 4);
  for (int idx : c.frame_indices) CHECK((idx == 0 || idx == 1));
  CHECK(std::is_sorted(c.frame_indices.begin(), c.frame_indices.end()));

  CHECK_THROWS_AS(sample_training_clip(exact, 0, rng), ValidationError);
}

TEST_CASE("split_inference_clips pads the tail and preserves order") {
  auto t8 = fake_tracklet(8);
  auto clips = split_inference_clips(t8, 4);
  REQUIRE(clips.size() == 2);
  CHECK(clips[0].frame_indices == std::vector<int>{0, 1, 2, 3});
  CHECK(clips[1].frame_indices == std::vector<int>{4, 5, 6, 7});

  auto t9 = fake_tracklet(9);
  clips = split_inference_clips(t9, 4);
  REQUIRE(clips.size() == 3);
  CHECK(clips[2].frame_indices == std::vector<int>{8, 8, 8, 8});

  auto t3 = fake_tracklet(3);
  clips = split_inference_clips(t3, 4);
  REQUIRE(clips.size() == 1);
  CHECK(clips[0].frame_indices == std::vector<int>{0, 1, 2, 2});
}

TEST_CASE("split_inference_clips concatenation reproduces frame order") {
  for (int len : {1, 4, 7, 12, 23}) {
    for (int t : {1, 3, 4, 8}) {
      auto tracklet = fake_tracklet(len);
      auto clips = split_inference_clips(tracklet, t);
      CHECK(static_cast<int>(clips.size()) == (len + t - 1) / t);
      std::vector<int> flattened;
      for (const auto& c : clips) {
        CHECK(c.length() == t);
        flattened.insert(flattened.end(), c.frame_indices.begin(), c.frame_indices.end());
      }
      // The first len entries are the original order; the tail repeats the
      // final frame.
      for (int i = 0; i < len; ++i) CHECK(flattened[static_cast<std::size_t>(i)] == i);
      for (std::size_t i = static_cast<std::size_t>(len); i < flattened.size(); ++i)
        CHECK(flattened[i] == len - 1);
    }
  }
}

TEST_CASE("pk batch stream emits exact C x K batches covering all identities") {
  TempDir dir("pk");
  generate_synthetic(dir.path(), small_spec(10, 2, 2, 3));
  auto index = scan_dataset(dir.path(), "synthetic");

  BatchSpec spec;
  spec.num_ids = 4;
  spec.clips_per_id = 3;
  PkBatchStream stream(index, spec, 7);

  std::set<int> seen;
  for (const auto& batch : stream.epoch_batches(1)) {
    CHECK(batch.size() == 12);
    std::map<int, int> counts;
    for (const auto& [rec, label] : batch) ++counts[label];
    CHECK(counts.size() == 4);
    for (const auto& [label, count] : counts) {
      CHECK(count == 3);
      seen.insert(label);
    }
  }
  CHECK(seen.size() == 10);  // every identity visited

  // Deterministic per (seed, epoch).
  auto a = stream.epoch_batches(3);
  auto b = stream.epoch_batches(3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("pk batch stream rejects too few identities") {
  TempDir dir("pk_small");
  generate_synthetic(dir.path(), small_spec(4, 2, 1, 2));
  auto index = scan_dataset(dir.path(), "synthetic");
  BatchSpec spec;
  spec.num_ids = 8;
  spec.clips_per_id = 4;
  CHECK_THROWS_AS(PkBatchStream(index, spec, 1), ConfigError);
}

TEST_CASE("batch spec invariants") {
  BatchSpec ok;
  ok.validate();
  BatchSpec bad1;
  bad1.num_ids = 1;
  CHECK_THROWS_AS(bad1.validate(), ValidationError);
  BatchSpec bad2;
  bad2.clips_per_id = 1;
  CHECK_THROWS_AS(bad2.validate(), ValidationError);
}
