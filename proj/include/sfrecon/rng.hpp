#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace sfr {

// Deterministic RNG wrapper. std::mt19937_64 is fully specified by the
// standard, but the <random> distributions are not, so the uniform and
// normal transforms are spelled out here to keep seeded runs bit-stable
// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, unbiased.
  std::size_t index(std::size_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
  }

  /// Standard normal via Marsaglia's polar method.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Eigen::Vector3d normal3() {
    Eigen::Vector3d g;
    g << normal(), normal(), normal();
    return g;
  }

  /// Uniform direction on the unit sphere.
  Eigen::Vector3d unit_vector() {
    Eigen::Vector3d g;
    double n2;
    do {
      g = normal3();
      n2 = g.squaredNorm();
    } while (n2 < 1e-24);
    return g / std::sqrt(n2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// splitmix64 finalizer, used to derive independent seed streams.
inline std::uint64_t mix_u64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Decorrelated sub-stream seed. Streams keyed by e.g. (iteration, subfield)
/// are independent of thread scheduling, which keeps concurrent runs
/// reproducible.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return mix_u64(mix_u64(base ^ 0x5851f42d4c957f2dull) ^ mix_u64(a) ^
                 mix_u64(mix_u64(b) + 0x14057b7ef767814full));
}

}  // namespace sfr
