#include "vreid/data/synthetic.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/core.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vreid/core/error.hpp"
#include "vreid/core/random.hpp"

namespace vreid::data {

namespace fs = std::filesystem;

namespace {

struct IdentitySignature {
  double angle;         // stripe orientation
  double freq;          // stripes across the image width
  double color_a[3];    // stripe palette
  double color_b[3];
  double accent_row;    // horizontal accent band position (body landmark)
  double accent_col[3];
};

IdentitySignature identity_signature(std::uint64_t seed, int id) {
  RandomSource rng(derive_seed(seed, {0x1d, static_cast<std::uint64_t>(id)}));
  IdentitySignature s;
  s.angle = rng.uniform(0.0, 3.14159265358979323846);
  s.freq = rng.uniform(2.0, 6.0);
  for (int c = 0; c < 3; ++c) s.color_a[c] = rng.uniform(0.15, 0.85);
  for (int c = 0; c < 3; ++c) s.color_b[c] = rng.uniform(0.15, 0.85);
  s.accent_row = rng.uniform(0.2, 0.8);
  for (int c = 0; c < 3; ++c) s.accent_col[c] = rng.uniform(0.0, 1.0);
  return s;
}

struct CameraEffect {
  double gain[3];
  double bias[3];
};

// Cameras model fixed rigs shared by every dataset generated with this tool:
// the spec seed draws identities and noise, not the camera network. Datasets
// generated with different seeds therefore share camera characteristics, the
// way two capture sessions at one site would, which is what makes
// cross-dataset transfer meaningful.
CameraEffect camera_effect(int cam) {
  RandomSource rng(derive_seed(0xca11b4a7e, {static_cast<std::uint64_t>(cam)}));
  CameraEffect e;
  for (int c = 0; c < 3; ++c) e.gain[c] = rng.uniform(0.6, 1.1);
  for (int c = 0; c < 3; ++c) e.bias[c] = rng.uniform(-0.12, 0.12);
  return e;
}

}  // namespace

void generate_synthetic(const fs::path& root, const SyntheticSpec& spec) {
  if (spec.num_ids < 1 || spec.cams < 1 || spec.tracklets_per < 1 || spec.frames_per < 1)
    throw ValidationError(cat("synthetic spec counts must be >= 1 (ids=", spec.num_ids, " cams=", spec.cams,
                              " tracklets=", spec.tracklets_per, " frames=", spec.frames_per, ")"));
  if (spec.height < 8 || spec.width < 8)
    throw ValidationError(cat("synthetic image size too small: ", spec.height, "x", spec.width));

  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError(cat("cannot create dataset root ", root.string(), ": ", ec.message()));

  const double pi2 = 6.28318530717958647692;
  cv::Mat img(spec.height, spec.width, CV_8UC3);

  for (int id = 0; id < spec.num_ids; ++id) {
    const IdentitySignature sig = identity_signature(spec.seed, id);
    for (int cam = 0; cam < spec.cams; ++cam) {
      const CameraEffect eff = camera_effect(cam);
      for (int tr = 0; tr < spec.tracklets_per; ++tr) {
        char sub[64];
        std::snprintf(sub, sizeof(sub), "%04d/%d/%03d", id, cam, tr);
        const fs::path dir = root / sub;
        fs::create_directories(dir, ec);
        if (ec) throw IoError(cat("cannot create ", dir.string(), ": ", ec.message()));

        RandomSource rng(derive_seed(spec.seed, {0xf0, static_cast<std::uint64_t>(id),
                                                 static_cast<std::uint64_t>(cam),
                                                 static_cast<std::uint64_t>(tr)}));
        double phase = rng.uniform(0.0, pi2);
        for (int f = 0; f < spec.frames_per; ++f) {
          phase += rng.uniform(0.15, 0.45);  // stripe drift simulates motion
          const double jx = rng.uniform(-2.0, 2.0);
          const double jy = rng.uniform(-2.0, 2.0);
          const double ca = std::cos(sig.angle), sa = std::sin(sig.angle);
          for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
              const double u = (x + jx) / spec.width;
              const double v = (y + jy) / spec.height;
              const double wave = std::sin(pi2 * sig.freq * (u * ca + v * sa) + phase);
              const double mixv = 0.5 * (1.0 + wave);
              double px[3];
              for (int c = 0; c < 3; ++c) px[c] = mixv * sig.color_a[c] + (1.0 - mixv) * sig.color_b[c];
              // Accent band: a stable per-identity landmark.
              if (std::abs(v - sig.accent_row) < 0.06) {
                for (int c = 0; c < 3; ++c) px[c] = 0.7 * px[c] + 0.3 * sig.accent_col[c];
              }
              cv::Vec3b& out = img.at<cv::Vec3b>(y, x);
              for (int c = 0; c < 3; ++c) {
                double value = px[c] * eff.gain[c] + eff.bias[c] + rng.normal(0.0, 0.04);
                value = std::clamp(value, 0.0, 1.0);
                // OpenCV stores BGR.
                out[2 - c] = static_cast<unsigned char>(std::lround(value * 255.0));
              }
            }
          }
          char name[32];
          std::snprintf(name, sizeof(name), "frame_%05d.png", f);
          const fs::path file = dir / name;
          if (!cv::imwrite(file.string(), img))
            throw IoError(cat("cannot write image ", file.string()));
        }
      }
    }
  }
}

}  // namespace vreid::data
