#include "relux/regression.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "relux/errors.hpp"
#include "relux/rng.hpp"

namespace relux {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
  auto relabel = [&](const std::exception& e) {
    return std::string("stage=") + stage + ": " + e.what();
  };
  try {
    return fn();
  } catch (const InputError& e) {
    throw InputError(relabel(e));
  } catch (const BudgetError& e) {
    throw BudgetError(relabel(e));
  } catch (const ResourceError& e) {
    throw ResourceError(relabel(e));
  } catch (const NumericalError& e) {
    throw NumericalError(relabel(e));
  } catch (const TransportError& e) {
    throw TransportError(relabel(e));
  } catch (const ProtocolError& e) {
    throw ProtocolError(relabel(e));
  } catch (const Error& e) {
    throw Error(relabel(e));
  }
}

double mean_squared_residual(const std::vector<FeatureSample>& samples,
                             const Vec& v) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (const FeatureSample& s : samples) {
    const double r = s.z.dot(v) - s.y;
    acc += r * r;
  }
  return acc / static_cast<double>(samples.size());
}

}  // namespace

void RegressionConfig::validate() const {
  if (n_samples && *n_samples < 1)
    throw InputError("regression: n_samples must be >= 1");
  if (W_bound && !(*W_bound > 0.0))
    throw InputError("regression: W bound must be positive");
  if (M_bound && !(*M_bound > 0.0))
    throw InputError("regression: M bound must be positive");
  if (!(solver_tol > 0.0))
    throw InputError("regression: solver tolerance must be positive");
}

FeatureSample featurize(const CandidateSet& candidates, const Vec& x,
                        double y) {
  if (candidates.dim != 0 && candidates.dim != x.size())
    throw InputError("featurize: input dimension != candidate dimension");
  const int p = candidates.size();
  const int d = static_cast<int>(x.size());
  FeatureSample s;
  s.z.resize(p + d + 1);
  for (int j = 0; j < p; ++j) {
    const Candidate& c = candidates.entries[j];
    s.z[j] = std::max(0.0, c.w.dot(x) - c.b);
  }
  s.z.segment(p, d) = x;
  s.z[p + d] = 1.0;
  s.y = y;
  return s;
}

Dataset draw_dataset(Oracle& oracle, const CandidateSet& candidates, int64_t n,
                     double M_bound, uint64_t seed) {
  if (n < 1) throw InputError("draw_dataset: need n >= 1");
  if (!(M_bound > 0.0)) throw InputError("draw_dataset: M bound must be > 0");
  const int d = oracle.dim();
  Rng rng(seed);
  Dataset out;
  out.samples.reserve(static_cast<size_t>(n));
  const int64_t attempt_cap = std::max<int64_t>(10'000'000, 1000 * n);
  int64_t attempts = 0;
  while (static_cast<int64_t>(out.samples.size()) < n) {
    if (++attempts > attempt_cap) {
      std::ostringstream os;
      os << "draw_dataset: rejection sampling exceeded " << attempt_cap
         << " attempts; M = " << M_bound << " is too small for dim " << d;
      throw ResourceError(os.str());
    }
    const Vec x = rng.normal_vector(d);
    if (x.norm() > M_bound) {
      ++out.rejected;
      continue;
    }
    const double y = oracle.query(x);
    out.samples.push_back(featurize(candidates, x, y));
  }
  return out;
}

Vec constrained_least_squares(const std::vector<FeatureSample>& samples,
                              double W_bound, double tol) {
  if (samples.empty()) throw InputError("constrained_least_squares: no samples");
  if (!(W_bound > 0.0))
    throw InputError("constrained_least_squares: W bound must be positive");
  if (!(tol > 0.0))
    throw InputError("constrained_least_squares: tol must be positive");
  const int p = static_cast<int>(samples.front().z.size());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  Vec rhs = Vec::Zero(p);
  for (const FeatureSample& s : samples) {
    if (s.z.size() != p)
      throw InputError("constrained_least_squares: inconsistent feature size");
    gram.selfadjointView<Eigen::Lower>().rankUpdate(s.z);
    rhs += s.y * s.z;
  }
  gram = gram.selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success)
    throw NumericalError("constrained_least_squares: eigensolver failed");
  const Vec evals = es.eigenvalues().cwiseMax(0.0);
  const Vec rot = es.eigenvectors().transpose() * rhs;

  // Null-space modes of the Gram matrix carry no signal; dropping them makes
  // the lambda = 0 endpoint the minimum-norm least-squares solution.
  const double rank_tol =
      evals.maxCoeff() * static_cast<double>(p) * 1e-14;
  auto coeffs_at = [&](double lambda) {
    Vec c = Vec::Zero(p);
    for (int i = 0; i < p; ++i)
      if (evals[i] > rank_tol) c[i] = rot[i] / (evals[i] + lambda);
    return c;
  };
  auto norm_at = [&](double lambda) { return coeffs_at(lambda).norm(); };

  double lambda = 0.0;
  if (norm_at(0.0) > W_bound) {
    double lo = 0.0;
    double hi = std::max(evals.maxCoeff(), 1.0) * 1e-9;
    int expansions = 0;
    while (norm_at(hi) > W_bound) {
      lo = hi;
      hi *= 4.0;
      if (++expansions > 400)
        throw NumericalError(
            "constrained_least_squares: ridge bracket expansion failed");
    }
    bool converged = false;
    for (int iter = 0; iter < 200; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (norm_at(mid) > W_bound)
        lo = mid;
      else
        hi = mid;
      const double n_hi = norm_at(hi);
      if (n_hi <= W_bound && n_hi >= W_bound * (1.0 - 1e-12)) {
        converged = true;
        break;
      }
    }
    const double n_hi = norm_at(hi);
    if (!converged && !(n_hi <= W_bound && n_hi >= W_bound * (1.0 - tol))) {
      std::ostringstream os;
      os << "constrained_least_squares: bisection did not converge after 200 "
            "iterations (lambda in ["
         << lo << ", " << hi << "], ||v|| = " << n_hi << ", W = " << W_bound
         << ")";
      throw NumericalError(os.str());
    }
    lambda = hi;
  }
  return es.eigenvectors() * coeffs_at(lambda);
}

Network assemble(const CandidateSet& candidates, const Vec& coeffs, int dim) {
  const int p = candidates.size();
  if (coeffs.size() != p + dim + 1) {
    std::ostringstream os;
    os << "assemble: coefficient length " << coeffs.size() << " != |S|+d+1 = "
       << p + dim + 1;
    throw InputError(os.str());
  }
  Network net;
  net.dim = dim;
  net.neurons.reserve(p);
  for (int j = 0; j < p; ++j) {
    Neuron n;
    n.sign = coeffs[j] < 0.0 ? -1.0 : 1.0;
    n.w = candidates.entries[j].w;
    n.bias = candidates.entries[j].b;
    n.coeff = coeffs[j];
    net.neurons.push_back(std::move(n));
  }
  net.affine_w = coeffs.segment(p, dim);
  net.affine_b = -coeffs[p + dim];
  net.validate();
  return net;
}

LearnResult learn_from_queries(Oracle& oracle, const ExtractionParams& p,
                               const RegressionConfig& cfg, uint64_t seed) {
  cfg.validate();
  const double t_start = now_seconds();
  const uint64_t count_start = oracle.query_count();
  const int d = oracle.dim();

  LearnResult result;
  result.extraction = run_stage("get_neurons", [&] {
    return get_neurons(oracle, p, derive_seed(seed, 1));
  });
  const double t_extracted = now_seconds();

  const CandidateSet& cands = result.extraction.candidates;
  const Schedule& sched = result.extraction.schedule;
  const double W =
      cfg.W_bound.value_or(sched.regression_w_bound(p));
  const double M = cfg.M_bound.value_or(
      std::sqrt(static_cast<double>(d)) +
      2.0 * std::sqrt(std::log(1.0 / p.delta_conf)));

  int64_t n = cfg.n_samples.value_or(
      std::max<int64_t>(10 * (cands.size() + d + 1), 10'000));
  int64_t n_holdout = std::max<int64_t>(n / 10, 100);
  if (const auto remaining = oracle.remaining_budget()) {
    const int64_t rem = static_cast<int64_t>(*remaining);
    if (rem < 2) throw BudgetError("stage=draw_dataset: budget exhausted");
    n_holdout = std::min(n_holdout, std::max<int64_t>(rem / 10, 1));
    n = std::min(n, rem - n_holdout);
    if (n < 1) throw BudgetError("stage=draw_dataset: budget exhausted");
  }

  const Dataset train = run_stage("draw_dataset", [&] {
    return draw_dataset(oracle, cands, n, M, derive_seed(seed, 2));
  });
  const Dataset holdout = run_stage("draw_dataset", [&] {
    return draw_dataset(oracle, cands, n_holdout, M, derive_seed(seed, 3));
  });

  const Vec coeffs = run_stage("constrained_least_squares", [&] {
    return constrained_least_squares(train.samples, W, cfg.solver_tol);
  });
  result.model = run_stage("assemble", [&] {
    return assemble(cands, coeffs, d);
  });
  const double t_done = now_seconds();

  LearnReport& rep = result.report;
  rep.schedule = sched;
  rep.seed = seed;
  rep.query_count = oracle.query_count() - count_start;
  rep.candidate_count = cands.size();
  rep.n_train = n;
  rep.n_holdout = n_holdout;
  rep.W_bound = W;
  rep.M_bound = M;
  rep.train_loss = mean_squared_residual(train.samples, coeffs);
  rep.holdout_loss = mean_squared_residual(holdout.samples, coeffs);
  rep.train_rejection_rate = train.rejection_rate();
  rep.truncation_warning = train.truncation_warning();
  rep.wall_extract_s = t_extracted - t_start;
  rep.wall_regress_s = t_done - t_extracted;
  rep.wall_total_s = t_done - t_start;
  return result;
}

}  // namespace relux
