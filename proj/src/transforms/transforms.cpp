#include "vreid/transforms/transforms.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

namespace vreid::tfm {

void ReaConfig::validate() const {
  if (probability < 0.0 || probability > 1.0)
    throw ValidationError(cat("rea.probability must be in [0, 1], got ", probability));
  if (!(area_min > 0.0 && area_min <= area_max && area_max < 1.0))
    throw ValidationError(cat("rea area range must satisfy 0 < min <= max < 1, got [", area_min, ", ", area_max, "]"));
  if (!(aspect_min > 0.0 && aspect_min <= 1.0))
    throw ValidationError(cat("rea.aspect_min must be in (0, 1], got ", aspect_min));
}

void TransformConfig::validate() const {
  if (height <= 0 || width <= 0) throw ValidationError(cat("target size must be positive, got ", height, "x", width));
  if (pad < 0) throw ValidationError(cat("pad must be >= 0, got ", pad));
  if (flip_prob < 0.0 || flip_prob > 1.0) throw ValidationError(cat("flip_prob must be in [0, 1], got ", flip_prob));
  for (Scalar s : stddev)
    if (s <= 0.0) throw ValidationError("std components must be positive");
  rea.validate();
}

cv::Mat load_image(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError(cat("cannot decode image: ", path));
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

static void validate_frame(const cv::Mat& img) {
  if (img.empty() || img.rows == 0 || img.cols == 0) throw ValidationError("zero-sized image frame");
  if (img.channels() != 3) throw ValidationError(cat("expected a 3-channel RGB frame, got ", img.channels(), " channels"));
  if (img.type() != CV_8UC3) throw ValidationError("expected an 8-bit RGB frame");
}

void flip_horizontal(Tensor& frames, int frame_idx) {
  const int h = frames.dim(2), w = frames.dim(3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w / 2; ++x)
        std::swap(frames(frame_idx, c, y, x), frames(frame_idx, c, y, w - 1 - x));
}

namespace {

struct EraseRect {
  int y0, x0, h, w;
};

// Rectangle search per the standard random-erasing recipe: up to 100 attempts
// to fit area * aspect inside the frame.
bool pick_erase_rect(int height, int width, const ReaConfig& rea, RandomSource& rng, EraseRect& out) {
  const Scalar area = static_cast<Scalar>(height) * width;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const Scalar target = rng.uniform(rea.area_min, rea.area_max) * area;
    const Scalar aspect = rng.uniform(rea.aspect_min, 1.0 / rea.aspect_min);
    const int eh = static_cast<int>(std::lround(std::sqrt(target * aspect)));
    const int ew = static_cast<int>(std::lround(std::sqrt(target / aspect)));
    if (eh < 1 || ew < 1 || eh >= height || ew >= width) continue;
    out.y0 = rng.uniform_int(height - eh + 1);
    out.x0 = rng.uniform_int(width - ew + 1);
    out.h = eh;
    out.w = ew;
    return true;
  }
  return false;
}

}  // namespace

ClipTensor preprocess_clip(const std::vector<cv::Mat>& images, const TransformConfig& cfg,
                           RandomSource& rng) {
  cfg.validate();
  if (images.empty()) throw ValidationError("preprocess_clip: empty frame list");

  const int t = static_cast<int>(images.size());
  const int h = cfg.height, w = cfg.width;
  ClipTensor out;
  out.frames = Tensor({t, 3, h, w});
  out.erase_labels.assign(static_cast<std::size_t>(t), 0);

  for (int f = 0; f < t; ++f) {
    validate_frame(images[static_cast<std::size_t>(f)]);
    // One parent draw per frame keeps frame streams independent of each other.
    RandomSource frame_rng(derive_seed(rng.next_u64(), {static_cast<std::uint64_t>(f)}));

    cv::Mat resized;
    cv::resize(images[static_cast<std::size_t>(f)], resized, cv::Size(w, h), 0.0, 0.0, cv::INTER_LINEAR);

    int crop_y = 0, crop_x = 0;
    if (cfg.train && cfg.pad > 0) {
      crop_y = frame_rng.uniform_int(2 * cfg.pad + 1);
      crop_x = frame_rng.uniform_int(2 * cfg.pad + 1);
    }
    const bool flip = cfg.train && frame_rng.uniform() < cfg.flip_prob;

    // Resize -> zero-pad -> crop -> flip -> normalize, fused per pixel.
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const int sx = flip ? (w - 1 - x) : x;
          // Position in the padded image, then back into resized coordinates.
          const int py = y + crop_y - cfg.pad;
          const int px = sx + crop_x - cfg.pad;
          Scalar value = 0.0;
          if (!cfg.train || (py >= 0 && py < h && px >= 0 && px < w)) {
            const int ry = cfg.train ? py : y;
            const int rx = cfg.train ? px : x;
            value = static_cast<Scalar>(resized.at<cv::Vec3b>(ry, rx)[c]) / 255.0;
          }
          out.frames(f, c, y, x) = (value - cfg.mean[static_cast<std::size_t>(c)]) /
                                   cfg.stddev[static_cast<std::size_t>(c)];
        }
      }
    }

    if (cfg.train && cfg.rea.probability > 0.0 && frame_rng.uniform() < cfg.rea.probability) {
      EraseRect rect{};
      if (pick_erase_rect(h, w, cfg.rea, frame_rng, rect)) {
        for (int c = 0; c < 3; ++c)
          for (int y = rect.y0; y < rect.y0 + rect.h; ++y)
            for (int x = rect.x0; x < rect.x0 + rect.w; ++x)
              out.frames(f, c, y, x) =
                  cfg.rea.fill == ReaConfig::Fill::random ? frame_rng.normal() : 0.0;
        out.erase_labels[static_cast<std::size_t>(f)] = 1;
      }
    }
  }
  return out;
}

Tensor denormalize(const Tensor& frames, const TransformConfig& cfg) {
  Tensor out(frames.shape());
  const int t = frames.dim(0), h = frames.dim(2), w = frames.dim(3);
  for (int f = 0; f < t; ++f)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          out(f, c, y, x) = frames(f, c, y, x) * cfg.stddev[static_cast<std::size_t>(c)] +
                            cfg.mean[static_cast<std::size_t>(c)];
  return out;
}

}  // namespace vreid::tfm
