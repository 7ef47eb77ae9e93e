#include <doctest.h>

#include <opencv2/core.hpp>

#include <fstream>

#include "helpers.hpp"
#include "vreid/transforms/transforms.hpp"

using namespace vreid;
using namespace vreid::tfm;
using testutil::max_abs_diff;

namespace {

cv::Mat test_image(int h, int w, int seed = 0) {
  cv::Mat img(h, w, CV_8UC3);
  RandomSource rng(static_cast<std::uint64_t>(seed) + 100);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto& px = img.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) px[c] = static_cast<unsigned char>(rng.uniform_int(256));
    }
  return img;
}

TransformConfig small_cfg(bool train) {
  TransformConfig cfg;
  cfg.height = 32;
  cfg.width = 16;
  cfg.pad = 4;
  cfg.train = train;
  return cfg;
}

}  // namespace

TEST_CASE("eval mode produces the paper-sized normalized tensor") {
  TransformConfig cfg;  // defaults: 244 x 112, eval
  cfg.train = false;
  RandomSource rng(1);
  auto out = preprocess_clip({test_image(300, 150)}, cfg, rng);
  CHECK(out.frames.shape() == std::vector<int>{1, 3, 244, 112});
  CHECK(out.erase_labels == std::vector<int>{0});
  CHECK(out.frames.all_finite());
}

TEST_CASE("disabled augmentation still in train mode reduces to crop pipeline") {
  auto cfg = small_cfg(true);
  cfg.flip_prob = 0.0;
  cfg.rea.probability = 0.0;
  cfg.pad = 0;  // no pad: crop is identity
  RandomSource rng_train(5), rng_eval(5);
  const auto img = test_image(40, 20);
  auto train_out = preprocess_clip({img}, cfg, rng_train);
  auto eval_cfg = cfg;
  eval_cfg.train = false;
  auto eval_out = preprocess_clip({img}, eval_cfg, rng_eval);
  CHECK(max_abs_diff(train_out.frames, eval_out.frames) == 0.0);
  CHECK(train_out.erase_labels == std::vector<int>{0});
}

TEST_CASE("normalization is invertible") {
  auto cfg = small_cfg(false);
  RandomSource rng(2);
  auto out = preprocess_clip({test_image(32, 16)}, cfg, rng);
  Tensor pixels = denormalize(out.frames, cfg);
  for (std::int64_t i = 0; i < pixels.size(); ++i) {
    CHECK(pixels.data()[i] >= -1e-9);
    CHECK(pixels.data()[i] <= 1.0 + 1e-9);
    // Round-trip through normalize again.
    const std::size_t c = static_cast<std::size_t>((i / (32 * 16)) % 3);
    const Scalar renorm = (pixels.data()[i] - cfg.mean[c]) / cfg.stddev[c];
    CHECK(std::abs(renorm - out.frames.data()[i]) < 1e-6);
  }
}

TEST_CASE("flip applied twice is identity") {
  auto cfg = small_cfg(false);
  RandomSource rng(3);
  auto out = preprocess_clip({test_image(32, 16)}, cfg, rng);
  Tensor flipped = out.frames;
  flip_horizontal(flipped, 0);
  CHECK(max_abs_diff(flipped, out.frames) > 0.0);  // flip changes pixels
  flip_horizontal(flipped, 0);
  CHECK(max_abs_diff(flipped, out.frames) == 0.0);
}

TEST_CASE("rea probability 1 erases exactly one rectangle per frame") {
  auto cfg = small_cfg(true);
  cfg.flip_prob = 0.3;
  cfg.rea.probability = 1.0;
  auto cfg_off = cfg;
  cfg_off.rea.probability = 0.0;

  std::vector<cv::Mat> images;
  for (int f = 0; f < 8; ++f) images.push_back(test_image(40, 20, f));

  RandomSource rng_on(9), rng_off(9);
  auto with_rea = preprocess_clip(images, cfg, rng_on);
  auto without = preprocess_clip(images, cfg_off, rng_off);

  for (int f = 0; f < 8; ++f) {
    CHECK(with_rea.erase_labels[static_cast<std::size_t>(f)] == 1);
    // Differences confined to one axis-aligned rectangle, identical across
    // channels.
    int y0 = cfg.height, y1 = -1, x0 = cfg.width, x1 = -1;
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        bool diff = false;
        for (int c = 0; c < 3; ++c)
          diff = diff || with_rea.frames(f, c, y, x) != without.frames(f, c, y, x);
        if (diff) {
          y0 = std::min(y0, y);
          y1 = std::max(y1, y);
          x0 = std::min(x0, x);
          x1 = std::max(x1, x);
        }
      }
    REQUIRE(y1 >= y0);  // something was erased
    // Every pixel inside the bounding box differs (random normal fill).
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        bool diff = false;
        for (int c = 0; c < 3; ++c)
          diff = diff || with_rea.frames(f, c, y, x) != without.frames(f, c, y, x);
        CHECK(diff);
      }
  }
}

TEST_CASE("erase labels match pixel-diff ground truth at p=0.5") {
  auto cfg = small_cfg(true);
  cfg.rea.probability = 0.5;
  auto cfg_off = cfg;
  cfg_off.rea.probability = 0.0;

  const int frames = 2000;
  std::vector<cv::Mat> images;
  for (int f = 0; f < 16; ++f) images.push_back(test_image(40, 20, f));

  int erased = 0;
  for (int rep = 0; rep < frames / 16; ++rep) {
    RandomSource rng_on(static_cast<std::uint64_t>(rep) + 1000);
    RandomSource rng_off(static_cast<std::uint64_t>(rep) + 1000);
    auto on = preprocess_clip(images, cfg, rng_on);
    auto off = preprocess_clip(images, cfg_off, rng_off);
    for (int f = 0; f < 16; ++f) {
      bool diff = false;
      for (int c = 0; c < 3 && !diff; ++c)
        for (int y = 0; y < cfg.height && !diff; ++y)
          for (int x = 0; x < cfg.width && !diff; ++x)
            diff = on.frames(f, c, y, x) != off.frames(f, c, y, x);
      CHECK(static_cast<int>(diff) == on.erase_labels[static_cast<std::size_t>(f)]);
      erased += on.erase_labels[static_cast<std::size_t>(f)];
    }
  }
  const double rate = static_cast<double>(erased) / frames;
  CHECK(rate > 0.45);
  CHECK(rate < 0.55);
}

TEST_CASE("invalid inputs are rejected") {
  auto cfg = small_cfg(false);
  RandomSource rng(4);
  CHECK_THROWS_AS(preprocess_clip({}, cfg, rng), ValidationError);

  cv::Mat gray(20, 10, CV_8UC1);
  CHECK_THROWS_AS(preprocess_clip({gray}, cfg, rng), ValidationError);

  cv::Mat empty;
  CHECK_THROWS_AS(preprocess_clip({empty}, cfg, rng), ValidationError);

  auto bad = cfg;
  bad.flip_prob = 1.5;
  CHECK_THROWS_AS(preprocess_clip({test_image(20, 10)}, bad, rng), ValidationError);

  auto bad_rea = cfg;
  bad_rea.rea.area_min = 0.9;
  bad_rea.rea.area_max = 0.5;
  CHECK_THROWS_AS(preprocess_clip({test_image(20, 10)}, bad_rea, rng), ValidationError);
}

TEST_CASE("load_image rejects undecodable files") {
  testutil::TempDir dir("img");
  const auto path = dir.path() / "bogus.png";
  std::ofstream(path) << "not an image";
  CHECK_THROWS_AS(load_image(path.string()), IoError);
}
