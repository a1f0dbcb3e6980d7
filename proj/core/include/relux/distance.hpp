#pragma once

#include <cstdint>

#include "relux/network.hpp"

namespace relux {

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo estimate of E_{x~N(0,I)}[(F_A(x) - F_B(x))^2] with its
/// standard error.  Deterministic given the seed.
McEstimate l2_distance_mc(const Network& a, const Network& b,
                          int64_t n_samples, uint64_t seed);

/// Closed form for E[relu(<v,x>) relu(<v',x>)] under standard Gaussian x:
///   (1/2pi) ||v|| ||v'|| (sin(angle) + (pi - angle) cos(angle)).
double relu_correlation(const Vec& v, const Vec& v_prime);

}  // namespace relux
