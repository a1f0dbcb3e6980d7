#include "relux/distance.hpp"

#include <algorithm>
#include <cmath>

#include "relux/errors.hpp"
#include "relux/rng.hpp"

namespace relux {

McEstimate l2_distance_mc(const Network& a, const Network& b,
                          int64_t n_samples, uint64_t seed) {
  if (a.dim != b.dim)
    throw InputError("l2_distance_mc: network dimensions differ");
  if (n_samples < 2) throw InputError("l2_distance_mc: need n_samples >= 2");

  Rng rng(seed);
  double mean = 0.0;
  double m2 = 0.0;  // Welford accumulator over squared differences
  for (int64_t i = 0; i < n_samples; ++i) {
    const Vec x = rng.normal_vector(a.dim);
    const double diff = evaluate(a, x) - evaluate(b, x);
    const double sq = diff * diff;
    const double delta = sq - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (sq - mean);
  }
  const double n = static_cast<double>(n_samples);
  const double var = m2 / (n - 1.0);
  return {mean, std::sqrt(std::max(0.0, var) / n)};
}

double relu_correlation(const Vec& v, const Vec& v_prime) {
  if (v.size() != v_prime.size())
    throw InputError("relu_correlation: dimensions differ");
  const double nv = v.norm();
  const double nvp = v_prime.norm();
  if (nv == 0.0 || nvp == 0.0)
    throw InputError("relu_correlation: zero weight vector");
  const double c = std::clamp(v.dot(v_prime) / (nv * nvp), -1.0, 1.0);
  const double angle = std::acos(c);
  return nv * nvp * (std::sin(angle) + (M_PI - angle) * std::cos(angle)) /
         (2.0 * M_PI);
}

}  // namespace relux
