#pragma once

#include <cstdint>
#include <filesystem>

namespace vreid::data {

/// Synthetic dataset spec. Every identity gets a deterministic color/texture
/// signature (stripe orientation, frequency and palette) that a small model
/// can overfit; every camera applies a global tint and gain so cross-camera
/// matching is not solved by raw pixel statistics.
struct SyntheticSpec {
  int num_ids = 8;
  int cams = 2;
  int tracklets_per = 1;  // per (id, cam)
  int frames_per = 16;
  int height = 64;
  int width = 32;
  std::uint64_t seed = 1;
};

/// Writes root/<id>/<cam>/<tracklet>/<frame_%05d>.png. Deterministic: the
/// same spec produces a byte-identical tree.
void generate_synthetic(const std::filesystem::path& root, const SyntheticSpec& spec);

}  // namespace vreid::data
