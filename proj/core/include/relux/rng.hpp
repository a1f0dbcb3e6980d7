#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace relux {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive an independent stream seed from a root seed.  Used wherever a
/// stage of a pipeline needs its own reproducible randomness.
inline uint64_t derive_seed(uint64_t root, uint64_t stream) {
  return splitmix64(root ^ splitmix64(stream + 0x517cc1b727220a95ULL));
}

/// Seeded generator.  All randomness in the library flows through this type
/// so that every stochastic operation is reproducible from an explicit seed.
/// Gaussians come from Box-Muller over raw mt19937_64 output, which keeps the
/// byte-for-byte draw sequence independent of the standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  Eigen::VectorXd normal_vector(int dim) {
    Eigen::VectorXd x(dim);
    for (int i = 0; i < dim; ++i) x[i] = normal();
    return x;
  }

  /// Uniform on the unit sphere (normalized Gaussian).
  Eigen::VectorXd unit_vector(int dim) {
    for (;;) {
      Eigen::VectorXd x = normal_vector(dim);
      const double n = x.norm();
      if (n > 1e-300) return x / n;
    }
  }

  /// Uniform sign.
  double sign() { return uniform() < 0.5 ? -1.0 : 1.0; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace relux
