#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "vreid/core/error.hpp"

namespace vreid {

/// splitmix64 finalizer, used to derive independent seeds from (seed, tag...) paths.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)));
}

/// Derives a stream seed from a base seed and a path of tags. Deterministic,
/// so any component can rebuild its stream from (seed, epoch, ordinal, ...)
/// without shared mutable RNG state.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(seed);
  for (std::uint64_t tag : path) s = mix_seed(s, tag);
  return s;
}

/// Seeded random source with self-contained distributions. The standard
/// distribution objects are implementation-defined, so everything that must
/// reproduce bit-for-bit across runs goes through these methods instead.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Lemire reduction, no rejection loop.
  int uniform_int(int n) {
    if (n <= 0) throw ValidationError(cat("uniform_int: n must be positive, got ", n));
    return static_cast<int>((static_cast<unsigned __int128>(gen_()) * static_cast<std::uint64_t>(n)) >> 64);
  }

  /// Standard normal via Box-Muller. Stateless: draws two uniforms per call.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[i], v[static_cast<std::size_t>(j)]);
    }
  }

  /// k indices from [0, n): without replacement when k <= n, with replacement otherwise.
  std::vector<int> sample_indices(int n, int k) {
    if (n <= 0 || k <= 0) throw ValidationError(cat("sample_indices: need n, k > 0, got n=", n, " k=", k));
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    if (k <= n) {
      std::vector<int> pool(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
      shuffle(pool);
      out.assign(pool.begin(), pool.begin() + k);
    } else {
      for (int i = 0; i < k; ++i) out.push_back(uniform_int(n));
    }
    return out;
  }

  std::string serialize() const;
  void deserialize(const std::string& text);

 private:
  std::mt19937_64 gen_;
};

}  // namespace vreid
