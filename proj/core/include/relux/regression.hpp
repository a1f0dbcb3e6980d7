#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relux/extraction.hpp"
#include "relux/network.hpp"
#include "relux/oracle.hpp"

namespace relux {

/// One regression row: candidate ReLU features, then the raw input
/// coordinates, then a constant 1; y is the oracle's answer.
struct FeatureSample {
  Vec z;
  double y = 0.0;
};

struct RegressionConfig {
  std::optional<int64_t> n_samples;  // default max(10 (|S|+d+1), 1e4)
  std::optional<double> W_bound;     // default sqrt(tau/r) + k (R+B)
  std::optional<double> M_bound;     // default sqrt(d) + 2 sqrt(log(1/delta))
  double solver_tol = 1e-10;

  void validate() const;
};

FeatureSample featurize(const CandidateSet& candidates, const Vec& x,
                        double y);

struct Dataset {
  std::vector<FeatureSample> samples;
  int64_t rejected = 0;

  double rejection_rate() const {
    const double total = static_cast<double>(samples.size()) +
                         static_cast<double>(rejected);
    return total == 0.0 ? 0.0 : static_cast<double>(rejected) / total;
  }
  /// True when more than half the Gaussian draws fell outside the truncation
  /// radius -- the configured M is too small.
  bool truncation_warning() const { return rejection_rate() > 0.5; }
};

/// Rejection-samples x ~ N(0, I) until ||x|| <= M_bound, queries y = F(x)
/// for accepted points only, and featurizes.  Deterministic given the seed.
Dataset draw_dataset(Oracle& oracle, const CandidateSet& candidates, int64_t n,
                     double M_bound, uint64_t seed);

/// argmin_{||v|| <= W} sum_i (<v, z_i> - y_i)^2 via a ridge path: one
/// eigendecomposition of the Gram matrix, then bisection on the ridge
/// parameter until the solution norm meets the ball.  Exactly the
/// unconstrained (minimum-norm) solution when that is already feasible.
Vec constrained_least_squares(const std::vector<FeatureSample>& samples,
                              double W_bound, double tol);

/// Builds the hypothesis network sum_j v_j relu(<w_j, x> - b_j) +
/// <w_tail, x> - b_tail from a coefficient vector of length |S| + d + 1.
/// Candidate coefficients become per-neuron output weights; the constant
/// feature's coefficient is negated into the affine bias.
Network assemble(const CandidateSet& candidates, const Vec& coeffs, int dim);

struct LearnReport {
  Schedule schedule;
  uint64_t seed = 0;
  uint64_t query_count = 0;
  int candidate_count = 0;
  int64_t n_train = 0;
  int64_t n_holdout = 0;
  double W_bound = 0.0;
  double M_bound = 0.0;
  double train_loss = 0.0;
  double holdout_loss = 0.0;
  double train_rejection_rate = 0.0;
  bool truncation_warning = false;
  double wall_extract_s = 0.0;
  double wall_regress_s = 0.0;
  double wall_total_s = 0.0;
};

struct LearnResult {
  Network model;
  ExtractionRun extraction;
  LearnReport report;
};

/// Full pipeline: harvest candidates, draw a truncated Gaussian dataset,
/// solve the norm-constrained regression, assemble the hypothesis.
/// Errors from any stage propagate with a "stage=<name>" prefix.
LearnResult learn_from_queries(Oracle& oracle, const ExtractionParams& p,
                               const RegressionConfig& cfg, uint64_t seed);

}  // namespace relux
