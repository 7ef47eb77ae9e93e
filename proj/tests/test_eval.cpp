#include <doctest.h>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "oracles.hpp"
#include "vreid/data/sampling.hpp"
#include "vreid/data/synthetic.hpp"
#include "vreid/eval/metrics.hpp"
#include "vreid/eval/protocol.hpp"

using namespace vreid;
using namespace vreid::evalkit;
using testutil::random_tensor;

namespace {

std::vector<ItemMeta> to_meta(const std::vector<std::pair<int, int>>& pairs) {
  std::vector<ItemMeta> out;
  for (auto [id, cam] : pairs) out.push_back({id, cam});
  return out;
}

model::ReidModel tiny_model(int num_classes = 8, std::uint64_t seed = 1) {
  model::FrameEncoderSpec enc;
  enc.name = "tiny";
  enc.embed_dim = 16;
  model::HeadSpec head;
  head.num_classes = num_classes;
  head.attn_reduce_dim = 8;
  return model::ReidModel(enc, head, seed);
}

tfm::TransformConfig small_tf() {
  tfm::TransformConfig cfg;
  cfg.height = 16;
  cfg.width = 8;
  cfg.train = false;
  return cfg;
}

}  // namespace

TEST_CASE("distance matrix hand values and loop oracle") {
  Tensor a({2, 3});
  a(0, 0) = 1.0;  // e_x
  a(1, 1) = 1.0;  // e_y
  Tensor dist = distance_matrix(a, a);
  CHECK(dist(0, 0) == doctest::Approx(0.0));
  CHECK(dist(0, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  RandomSource rng(1);
  Tensor q = random_tensor({5, 7}, rng);
  Tensor g = random_tensor({9, 7}, rng);
  Tensor d = distance_matrix(q, g);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 9; ++j) {
      Scalar sq = 0.0;
      for (int k = 0; k < 7; ++k) sq += (q(i, k) - g(j, k)) * (q(i, k) - g(j, k));
      CHECK(d(i, j) == doctest::Approx(std::sqrt(sq)).epsilon(1e-9));
    }

  Tensor bad({2, 5});
  CHECK_THROWS_AS(distance_matrix(q, bad), ValidationError);
}

TEST_CASE("cosine distance flag") {
  Tensor a({2, 2});
  a(0, 0) = 2.0;          // same direction, different scale
  a(1, 0) = 5.0;
  Tensor d = distance_matrix(a, a, Metric::cosine);
  CHECK(d(0, 1) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("cmc basics: perfect ranking and camera filtering") {
  // 3 queries, gallery where the true match is uniquely nearest.
  Tensor qf({3, 2}), gf({3, 2});
  for (int i = 0; i < 3; ++i) {
    qf(i, 0) = i * 10.0;
    gf(i, 0) = i * 10.0 + 0.1;
  }
  auto q = to_meta({{0, 0}, {1, 0}, {2, 0}});
  auto g = to_meta({{0, 1}, {1, 1}, {2, 1}});
  Tensor dist = distance_matrix(qf, gf);
  auto res = compute_cmc(dist, q, g, {1, 2});
  CHECK(res.cmc.at(1) == doctest::Approx(1.0));
  CHECK(res.evaluated == 3);
  CHECK(res.excluded == 0);

  // A query whose only same-id entries share its camera is excluded.
  auto g2 = to_meta({{0, 0}, {1, 1}, {2, 1}});
  auto res2 = compute_cmc(dist, q, g2, {1});
  CHECK(res2.excluded == 1);
  CHECK(res2.evaluated == 2);
}

TEST_CASE("map hand value: single relevant at rank 2 of 2") {
  Tensor qf({1, 1}), gf({2, 1});
  qf(0, 0) = 0.0;
  gf(0, 0) = 0.5;   // nearer, wrong id
  gf(1, 0) = 2.0;   // farther, right id
  auto q = to_meta({{7, 0}});
  auto g = to_meta({{3, 1}, {7, 1}});
  auto res = compute_map(distance_matrix(qf, gf), q, g);
  CHECK(res.map == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("cmc and map match the exhaustive oracle on random instances") {
  RandomSource rng(2);
  const std::vector<int> ranks{1, 3, 5, 10};
  for (int trial = 0; trial < 40; ++trial) {
    const int nq = 8 + rng.uniform_int(8);
    const int ng = 20 + rng.uniform_int(20);
    Tensor qf = random_tensor({nq, 4}, rng);
    Tensor gf = random_tensor({ng, 4}, rng);
    std::vector<std::pair<int, int>> q, g;
    for (int i = 0; i < nq; ++i) q.emplace_back(rng.uniform_int(6), rng.uniform_int(2));
    for (int j = 0; j < ng; ++j) g.emplace_back(rng.uniform_int(6), rng.uniform_int(2));

    Tensor dist = distance_matrix(qf, gf);
    auto cmc = compute_cmc(dist, to_meta(q), to_meta(g), ranks);
    int oracle_excluded = 0;
    auto expect = oracle::cmc_brute_force(dist, q, g, ranks, &oracle_excluded);
    for (std::size_t ri = 0; ri < ranks.size(); ++ri)
      CHECK(cmc.cmc.at(ranks[ri]) == doctest::Approx(expect[ri]).epsilon(1e-12));
    CHECK(cmc.excluded == oracle_excluded);

    auto map = compute_map(dist, to_meta(q), to_meta(g));
    CHECK(map.map == doctest::Approx(oracle::map_brute_force(dist, q, g)).epsilon(1e-12));

    // Monotone CMC.
    double prev = 0.0;
    for (int r : ranks) {
      CHECK(cmc.cmc.at(r) >= prev);
      prev = cmc.cmc.at(r);
    }
    // Full-gallery rank reaches 1 for evaluated queries.
    auto full = compute_cmc(dist, to_meta(q), to_meta(g), {ng});
    if (full.evaluated > 0) CHECK(full.cmc.at(ng) == doctest::Approx(1.0));
  }
}

TEST_CASE("metrics are invariant under uniform feature scaling") {
  RandomSource rng(3);
  Tensor qf = random_tensor({6, 5}, rng);
  Tensor gf = random_tensor({15, 5}, rng);
  std::vector<std::pair<int, int>> q, g;
  for (int i = 0; i < 6; ++i) q.emplace_back(i % 3, 0);
  for (int j = 0; j < 15; ++j) g.emplace_back(j % 3, 1);

  Tensor qs = qf, gs = gf;
  qs.scale_(3.7);
  gs.scale_(3.7);
  auto a_cmc = compute_cmc(distance_matrix(qf, gf), to_meta(q), to_meta(g), {1, 5});
  auto b_cmc = compute_cmc(distance_matrix(qs, gs), to_meta(q), to_meta(g), {1, 5});
  CHECK(a_cmc.cmc == b_cmc.cmc);
  auto a_map = compute_map(distance_matrix(qf, gf), to_meta(q), to_meta(g));
  auto b_map = compute_map(distance_matrix(qs, gs), to_meta(q), to_meta(g));
  CHECK(a_map.map == doctest::Approx(b_map.map).epsilon(1e-12));
}

TEST_CASE("video feature equals single clip feature for exact-T tracklets") {
  testutil::TempDir dir("vf");
  data::SyntheticSpec spec;
  spec.num_ids = 2;
  spec.cams = 2;
  spec.frames_per = 4;
  spec.height = 16;
  spec.width = 8;
  spec.seed = 5;
  data::generate_synthetic(dir.path(), spec);
  auto index = data::scan_dataset(dir.path(), "synthetic");
  auto model = tiny_model();
  auto tf = small_tf();

  const auto& tracklet = index.tracklets.front();
  auto vf = extract_video_feature(tracklet, model, 4, tf);

  // Recompute the single clip feature directly.
  std::vector<cv::Mat> images;
  for (const auto& p : tracklet.frame_paths) images.push_back(tfm::load_image(p));
  RandomSource rng(0);
  auto prep = tfm::preprocess_clip(images, tf, rng);
  auto out = model.forward(prep.frames.reshaped({1, 4, 3, 16, 8}), false);
  for (int k = 0; k < 16; ++k) CHECK(vf.vec[static_cast<std::size_t>(k)] == out.post_bn(0, k));  // bitwise
}

TEST_CASE("video feature is the mean of clip features (oracle)") {
  testutil::TempDir dir("vf2");
  data::SyntheticSpec spec;
  spec.num_ids = 1;
  spec.cams = 1;
  spec.frames_per = 11;  // 3 clips of T=4 with padding
  spec.height = 16;
  spec.width = 8;
  spec.seed = 6;
  data::generate_synthetic(dir.path(), spec);
  auto index = data::scan_dataset(dir.path(), "synthetic");
  auto model = tiny_model();
  auto tf = small_tf();

  const auto& tracklet = index.tracklets.front();
  auto vf = extract_video_feature(tracklet, model, 4, tf);

  const auto clips = data::split_inference_clips(tracklet, 4);
  REQUIRE(clips.size() == 3);
  std::vector<Scalar> mean(16, 0.0);
  for (const auto& clip : clips) {
    std::vector<cv::Mat> images;
    for (int idx : clip.frame_indices)
      images.push_back(tfm::load_image(tracklet.frame_paths[static_cast<std::size_t>(idx)]));
    RandomSource rng(0);
    auto prep = tfm::preprocess_clip(images, tf, rng);
    auto out = model.forward(prep.frames.reshaped({1, 4, 3, 16, 8}), false);
    for (int k = 0; k < 16; ++k) mean[static_cast<std::size_t>(k)] += out.post_bn(0, k);
  }
  for (int k = 0; k < 16; ++k)
    CHECK(vf.vec[static_cast<std::size_t>(k)] == doctest::Approx(mean[static_cast<std::size_t>(k)] / 3.0).epsilon(1e-9));

  data::TrackletRecord empty;
  empty.key = "empty";
  CHECK_THROWS_AS(extract_video_feature(empty, model, 4, tf), ValidationError);
}

TEST_CASE("run_protocol on synthetic data produces a bounded report") {
  testutil::TempDir dir("proto");
  data::SyntheticSpec spec;
  spec.num_ids = 4;
  spec.cams = 2;
  spec.frames_per = 6;
  spec.height = 16;
  spec.width = 8;
  spec.seed = 7;
  data::generate_synthetic(dir.path(), spec);
  auto index = data::scan_dataset(dir.path(), "synthetic");
  auto model = tiny_model(4);

  EvalConfig cfg;
  cfg.clip_len = 4;
  cfg.ranks = {1, 3};
  auto report = run_protocol(index, model, small_tf(), cfg);
  for (const auto& [r, v] : report.cmc) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(report.map_score >= 0.0);
  CHECK(report.map_score <= 1.0);
  CHECK(report.num_query == 8);
  CHECK(report.protocol_name == "fixed");
  CHECK(report.feature_space == "post_bn");
  CHECK(report.clip_len == 4);
  auto j = report.protocol();
  CHECK(j.at("num_splits").get<int>() == 1);
}

TEST_CASE("cross-camera split protocol averages over seeded splits") {
  testutil::TempDir dir("proto2");
  // Build a prid-style tree from synthetic images.
  data::SyntheticSpec spec;
  spec.num_ids = 6;
  spec.cams = 2;
  spec.frames_per = 5;
  spec.height = 16;
  spec.width = 8;
  spec.seed = 8;
  data::generate_synthetic(dir.path() / "raw", spec);
  auto raw = data::scan_dataset(dir.path() / "raw", "synthetic");
  for (const auto& t : raw.tracklets) {
    const auto cam_dir = dir.path() / "multi_shot" / (t.camera_id == 0 ? "cam_a" : "cam_b") /
                         ("person_" + std::to_string(t.person_id));
    std::filesystem::create_directories(cam_dir);
    int i = 0;
    for (const auto& f : t.frame_paths)
      std::filesystem::copy_file(f, cam_dir / ("img_" + std::to_string(i++) + ".png"));
  }
  auto index = data::scan_dataset(dir.path(), "prid2011");
  auto model = tiny_model(6);

  EvalConfig cfg;
  cfg.clip_len = 4;
  cfg.num_splits = 3;
  cfg.ranks = {1, 2};
  cfg.seed = 99;
  auto report = run_protocol(index, model, small_tf(), cfg);
  CHECK(report.protocol_name == "cross-camera-splits");
  CHECK(report.num_splits == 3);
  for (const auto& [r, v] : report.cmc) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  // Seeded: identical report on rerun.
  auto again = run_protocol(index, model, small_tf(), cfg);
  CHECK(again.cmc == report.cmc);
  CHECK(again.map_score == report.map_score);
}

TEST_CASE("fixed protocol with explicit splits includes queries in the gallery") {
  // A mars-style fixed split built from synthetic images: queries join the
  // gallery side and the same-id same-camera filter removes each query's
  // own entry.
  testutil::TempDir dir("proto_fixed");
  data::SyntheticSpec spec;
  spec.num_ids = 3;
  spec.cams = 2;
  spec.frames_per = 4;
  spec.height = 16;
  spec.width = 8;
  spec.seed = 17;
  data::generate_synthetic(dir.path(), spec);
  auto index = data::scan_dataset(dir.path(), "synthetic");
  index.layout = "mars";  // exercise the fixed path with real splits
  for (auto& t : index.tracklets)
    t.split = t.camera_id == 0 ? data::Split::query : data::Split::gallery;
  index.build_label_map();

  auto model = tiny_model(3);
  EvalConfig cfg;
  cfg.clip_len = 4;
  cfg.ranks = {1, 2};
  auto report = run_protocol(index, model, small_tf(), cfg);
  CHECK(report.num_query == 3);
  CHECK(report.num_gallery == 6);  // 3 gallery tracklets + the 3 queries
  CHECK(report.excluded_queries == 0);
  auto j = report.protocol();
  CHECK(j.contains("notes"));
}

TEST_CASE("fixed protocol rejects a half-missing split") {
  // Gallery entries but no queries: the fixed protocol must name the gap.
  data::TrackletIndex index;
  index.layout = "mars";
  data::TrackletRecord rec;
  rec.person_id = 1;
  rec.camera_id = 0;
  rec.frame_paths = {"x.png"};
  rec.split = data::Split::gallery;
  rec.key = "g";
  index.tracklets.push_back(rec);
  index.build_label_map();

  auto model = tiny_model();
  EvalConfig cfg;
  try {
    run_protocol(index, model, small_tf(), cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("query") != std::string::npos);
  }
}

TEST_CASE("feature dump round-trips") {
  testutil::TempDir dir("dump");
  std::vector<VideoFeature> feats(3);
  RandomSource rng(4);
  for (int i = 0; i < 3; ++i) {
    feats[static_cast<std::size_t>(i)].vec = {rng.normal(), rng.normal(), rng.normal()};
    feats[static_cast<std::size_t>(i)].person_id = i;
    feats[static_cast<std::size_t>(i)].camera_id = i % 2;
    feats[static_cast<std::size_t>(i)].tracklet_key = "t" + std::to_string(i);
  }
  dump_features((dir.path() / "feat").string(), feats);
  auto loaded = load_features((dir.path() / "feat").string());
  REQUIRE(loaded.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(loaded[static_cast<std::size_t>(i)].vec == feats[static_cast<std::size_t>(i)].vec);
    CHECK(loaded[static_cast<std::size_t>(i)].person_id == i);
    CHECK(loaded[static_cast<std::size_t>(i)].tracklet_key == feats[static_cast<std::size_t>(i)].tracklet_key);
  }
}
