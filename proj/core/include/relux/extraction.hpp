#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relux/network.hpp"
#include "relux/oracle.hpp"
#include "relux/rng.hpp"

namespace relux {

/// Accuracy / confidence targets plus the a-priori bounds on the hidden
/// network, and the explicit constants the schedule formulas leave free.
/// The constant defaults are calibrated so that desk-scale extractions run
/// inside practical query budgets; every one of them is sweepable.
struct ExtractionParams {
  double epsilon = 0.1;     // target accuracy
  double delta_conf = 0.1;  // confidence
  int k_bound = 1;          // >= number of hidden units
  double R_bound = 1.0;     // >= max ||w_i||
  double B_bound = 1.0;     // >= max |b_i|

  double poly_const = 0.05;  // scale inside Delta = (epsilon/poly_const)^{9/2}
  double c_r = 2500.0;       // interval-length constant
  double c_tau = 4.0;        // search-radius constant
  double c_alpha = 5.0;      // finite-difference step constant
  double c_filter = 1.0;     // candidate bias-filter constant

  std::optional<uint64_t> m_cap;  // cap on the interval count

  void validate() const;

  /// Knob access by name (poly_const, c_r, c_tau, c_alpha, c_filter);
  /// nullptr when unknown.
  double* knob(const std::string& name);
};

/// Derived per-run quantities.
struct Schedule {
  double Delta = 0.0;     // angular resolution
  double r = 0.0;         // interval length
  double tau = 0.0;       // search radius: grid spans [-tau, tau]
  double alpha_fd = 0.0;  // finite-difference step
  uint64_t m = 0;         // number of intervals, ceil(2 tau / r)

  /// Coefficient-norm bound for the downstream regression:
  /// sqrt(tau/r) + k (R + B).
  double regression_w_bound(const ExtractionParams& p) const;
};

/// Computes (Delta, r, tau, alpha_fd, m) from the parameters, in dependency
/// order.  Throws ResourceError when m exceeds the configured cap, naming
/// the binding quantities.
Schedule make_schedule(const ExtractionParams& p, int dim);

/// x0 ~ N(0, I_d), v uniform on the sphere; reproducible from the seed.
GaussianLine sample_gaussian_line(int dim, uint64_t seed);

/// Result of probing one interval for the local linear piece.
struct BiasProbe {
  double intercept = 0.0;  // F|_L(t_mid) - slope * t_mid
  double slope = 0.0;      // secant slope over [lo, hi]
  double f_mid = 0.0;
  bool valid = false;  // false when the midpoint strays off the secant
};

/// Three queries (lo, hi, midpoint).  `valid` goes false when the midpoint
/// value deviates from the secant by more than 1e-9 * (1 + |F|), i.e. the
/// interval straddles a slope change.
BiasProbe get_bias(Oracle& oracle, const GaussianLine& line, double lo,
                   double hi);

/// Finite-difference gradient: d + 1 queries (base point plus d random unit
/// directions forming an orthonormal frame).  Exact whenever x keeps margin
/// alpha ||w_i|| from every activation boundary.  A degenerate solve retries
/// with fresh directions up to 3 times, then throws NumericalError.
Vec get_gradient(Oracle& oracle, const Vec& x, double alpha_fd, Rng& rng);
Vec get_gradient(Oracle& oracle, const Vec& x, double alpha_fd, uint64_t seed);

struct IntervalProbe {
  int index = 0;  // 1-based interval number
  double lo = 0.0;
  double hi = 0.0;
  Vec grad;
  double intercept = 0.0;
  bool valid = false;
};

struct Candidate {
  Vec w;
  double b = 0.0;
  int src_i = 0;  // interval indices whose probe difference produced this
  int src_j = 0;
  int line = 0;  // which line of a multi-line run; 0 for single-line runs
};

struct CandidateSet {
  int dim = 0;
  std::vector<Candidate> entries;

  int size() const { return static_cast<int>(entries.size()); }
};

struct ExtractionRun {
  CandidateSet candidates;
  GaussianLine line;
  Schedule schedule;
  uint64_t queries_used = 0;
  int valid_probes = 0;
  int probe_groups = 0;
  int filtered_out = 0;
};

/// Probes one Gaussian line on a uniform grid of m intervals of length r,
/// recovers the local gradient and intercept of each linear piece, and emits
/// every distinct probe-pair difference that passes the norm filter as a
/// candidate neuron.  Midpoint values are shared between the gradient and
/// bias probes and grid endpoints are shared between adjacent intervals, so
/// the exact query cost is m*(dim+2) + 1.
ExtractionRun get_neurons(Oracle& oracle, const ExtractionParams& p,
                          uint64_t seed);

/// Deterministic serialization of an extraction run (no timings), used by
/// the `extract` CLI and the byte-level replay checks.
std::string candidates_to_json(const ExtractionRun& run);

/// Union of several single-line runs.  One line suffices for the guarantee;
/// extra lines are a robustness experiment the CLI exposes via --lines.
struct MultiLineExtraction {
  std::vector<ExtractionRun> runs;
  CandidateSet merged;  // cross-line dedup, first line wins
  uint64_t queries_used = 0;
};

MultiLineExtraction get_neurons_lines(Oracle& oracle,
                                      const ExtractionParams& p, uint64_t seed,
                                      int n_lines);

std::string candidates_to_json(const MultiLineExtraction& multi);

}  // namespace relux
