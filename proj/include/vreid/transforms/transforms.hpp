#pragma once

#include <array>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "vreid/core/random.hpp"
#include "vreid/core/tensor.hpp"

namespace vreid::tfm {

/// Random Erasing parameters. Defaults follow the originating augmentation
/// method: one coin per frame, rectangle area in [2%, 40%] of the image,
/// aspect ratio in [r1, 1/r1].
struct ReaConfig {
  Scalar probability = 0.5;
  Scalar area_min = 0.02;
  Scalar area_max = 0.4;
  Scalar aspect_min = 0.3;  // r1; max is 1/r1
  enum class Fill { random, mean } fill = Fill::random;

  void validate() const;
};

struct TransformConfig {
  int height = 244;  // see README: kept as published, likely intended 224
  int width = 112;
  int pad = 10;
  Scalar flip_prob = 0.5;
  std::array<Scalar, 3> mean{0.485, 0.456, 0.406};
  std::array<Scalar, 3> stddev{0.229, 0.224, 0.225};
  ReaConfig rea;
  bool train = false;

  void validate() const;
};

struct ClipTensor {
  Tensor frames;                 // (T, 3, H, W), normalized RGB
  std::vector<int> erase_labels; // 1 iff REA fired on that frame
};

/// Decodes an image file into RGB; throws IoError / ValidationError.
cv::Mat load_image(const std::string& path);

/// Full per-frame pipeline: resize, zero-pad, random crop, horizontal flip,
/// normalize, random erasing. Eval mode (train=false) performs resize and
/// normalize only and labels every frame 0. Pure given the random source;
/// each frame consumes exactly one parent draw, so per-frame streams are
/// independent of each other.
ClipTensor preprocess_clip(const std::vector<cv::Mat>& images, const TransformConfig& cfg,
                           RandomSource& rng);

/// Inverse of the normalization step, for round-trip checks and rendering.
Tensor denormalize(const Tensor& frames, const TransformConfig& cfg);

/// In-place horizontal flip of one (3, H, W) frame slice.
void flip_horizontal(Tensor& frames, int frame_idx);

}  // namespace vreid::tfm
