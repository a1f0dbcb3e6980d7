#include "relux/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "relux/errors.hpp"

namespace relux {

namespace {

// Probes whose (gradient, intercept) agree within this tolerance are treated
// as samples of the same linear piece.  Distinct pieces differ by a full
// neuron weight, so this only has to sit above float noise.
constexpr double kProbeGroupTol = 5e-7;
// Candidates within this joint distance are duplicates.
constexpr double kDedupTol = 1e-9;
constexpr double kStraddleTol = 1e-9;

double joint_inf_dist(const Vec& wa, double ba, const Vec& wb, double bb) {
  return std::max((wa - wb).lpNorm<Eigen::Infinity>(), std::abs(ba - bb));
}

}  // namespace

void ExtractionParams::validate() const {
  if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (!(delta_conf > 0.0) || !(delta_conf < 1.0))
    throw InputError("delta must lie in (0, 1)");
  if (k_bound < 1) throw InputError("k bound must be >= 1");
  if (!(R_bound > 0.0)) throw InputError("R bound must be positive");
  if (!(B_bound > 0.0)) throw InputError("B bound must be positive");
  for (double c : {poly_const, c_r, c_tau, c_alpha, c_filter})
    if (!(c > 0.0)) throw InputError("schedule constants must be positive");
}

double* ExtractionParams::knob(const std::string& name) {
  if (name == "poly_const") return &poly_const;
  if (name == "c_r") return &c_r;
  if (name == "c_tau") return &c_tau;
  if (name == "c_alpha") return &c_alpha;
  if (name == "c_filter") return &c_filter;
  return nullptr;
}

double Schedule::regression_w_bound(const ExtractionParams& p) const {
  return std::sqrt(tau / r) + p.k_bound * (p.R_bound + p.B_bound);
}

Schedule make_schedule(const ExtractionParams& p, int dim) {
  p.validate();
  if (dim < 1) throw InputError("schedule: dimension must be >= 1");

  const double k = p.k_bound;
  const double sd = std::sqrt(static_cast<double>(dim));
  const double root_log_k_delta = std::sqrt(std::log(k / p.delta_conf));
  const double root_log_inv_delta = std::sqrt(std::log(1.0 / p.delta_conf));

  Schedule s;
  s.Delta = std::pow(p.epsilon / p.poly_const, 4.5);
  s.r = p.c_r * s.Delta * p.delta_conf * p.delta_conf /
        (std::pow(k, 4) * (sd + root_log_k_delta));
  const double w_min_bound = p.epsilon / (k * p.poly_const);
  s.tau = k * s.r + p.c_tau * (k * (sd + root_log_inv_delta) / w_min_bound +
                               k * (sd + root_log_inv_delta) * root_log_k_delta);
  s.alpha_fd =
      p.delta_conf * s.r / (p.c_alpha * k * (sd + root_log_k_delta));

  const double m_real = std::ceil(2.0 * s.tau / s.r);
  if (p.m_cap && m_real > static_cast<double>(*p.m_cap)) {
    std::ostringstream os;
    os << "schedule: m = " << m_real << " intervals exceeds cap " << *p.m_cap
       << " (r = " << s.r << ", tau = " << s.tau
       << "; raise c_r or the cap, or lower c_tau)";
    throw ResourceError(os.str());
  }
  if (m_real > 9.0e18) {
    std::ostringstream os;
    os << "schedule: m = " << m_real << " intervals is not representable"
       << " (r = " << s.r << " is the binding parameter)";
    throw ResourceError(os.str());
  }
  s.m = static_cast<uint64_t>(m_real);
  return s;
}

GaussianLine sample_gaussian_line(int dim, uint64_t seed) {
  if (dim < 1) throw InputError("sample_gaussian_line: dimension must be >= 1");
  Rng rng(seed);
  GaussianLine line;
  line.x0 = rng.normal_vector(dim);
  line.v = rng.unit_vector(dim);
  line.seed = seed;
  return line;
}

BiasProbe get_bias(Oracle& oracle, const GaussianLine& line, double lo,
                   double hi) {
  if (!(hi > lo)) throw InputError("get_bias: degenerate interval");
  const double f_lo = oracle.query(line.point_at(lo));
  const double f_hi = oracle.query(line.point_at(hi));
  const double t_mid = 0.5 * (lo + hi);
  const double f_mid = oracle.query(line.point_at(t_mid));

  BiasProbe probe;
  probe.slope = (f_hi - f_lo) / (hi - lo);
  probe.f_mid = f_mid;
  probe.intercept = f_mid - probe.slope * t_mid;
  probe.valid = std::abs(f_mid - 0.5 * (f_lo + f_hi)) <=
                kStraddleTol * (1.0 + std::abs(f_mid));
  return probe;
}

namespace {

/// Haar-random orthonormal frame: QR of a Gaussian matrix with the R
/// diagonal's signs folded in.  Columns are the probe directions; each is
/// marginally uniform on the sphere and the solve is perfectly conditioned.
Eigen::MatrixXd random_frame(int dim, Rng& rng) {
  Eigen::MatrixXd g(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

Vec gradient_with_base(Oracle& oracle, const Vec& x, double f_base,
                       double alpha_fd, Rng& rng) {
  const int d = static_cast<int>(x.size());
  for (int attempt = 0; attempt < 4; ++attempt) {
    const Eigen::MatrixXd frame = random_frame(d, rng);
    Vec diffs(d);
    for (int j = 0; j < d; ++j)
      diffs[j] =
          (oracle.query(x + alpha_fd * frame.col(j)) - f_base) / alpha_fd;
    const Vec w = frame * diffs;
    // Residual guard in place of an explicit condition estimate; an
    // orthonormal frame never trips it.
    const double resid =
        (frame.transpose() * w - diffs).lpNorm<Eigen::Infinity>();
    if (resid <= 1e-8 * (1.0 + diffs.lpNorm<Eigen::Infinity>())) return w;
  }
  throw NumericalError(
      "get_gradient: direction system stayed degenerate after 3 retries");
}

}  // namespace

Vec get_gradient(Oracle& oracle, const Vec& x, double alpha_fd, Rng& rng) {
  if (!(alpha_fd > 0.0))
    throw InputError("get_gradient: step must be positive");
  const double f_base = oracle.query(x);
  return gradient_with_base(oracle, x, f_base, alpha_fd, rng);
}

Vec get_gradient(Oracle& oracle, const Vec& x, double alpha_fd,
                 uint64_t seed) {
  Rng rng(seed);
  return get_gradient(oracle, x, alpha_fd, rng);
}

ExtractionRun get_neurons(Oracle& oracle, const ExtractionParams& p,
                          uint64_t seed) {
  const int d = oracle.dim();
  ExtractionRun run;
  run.schedule = make_schedule(p, d);
  run.line = sample_gaussian_line(d, derive_seed(seed, 1));
  Rng dir_rng(derive_seed(seed, 2));

  const Schedule& s = run.schedule;
  const uint64_t m = s.m;
  const uint64_t needed = m * (static_cast<uint64_t>(d) + 2) + 1;
  if (const auto remaining = oracle.remaining_budget();
      remaining && *remaining < needed) {
    std::ostringstream os;
    os << "get_neurons: needs " << needed << " queries but only " << *remaining
       << " remain in the budget";
    throw BudgetError(os.str());
  }

  const uint64_t count_before = oracle.query_count();
  const GaussianLine& line = run.line;

  // Grid endpoints, shared between adjacent intervals.
  std::vector<double> t_grid(m + 1), f_grid(m + 1);
  for (uint64_t i = 0; i <= m; ++i) {
    t_grid[i] = -s.tau + static_cast<double>(i) * s.r;
    f_grid[i] = oracle.query(line.point_at(t_grid[i]));
  }

  std::vector<IntervalProbe> probes;
  probes.reserve(m);
  for (uint64_t j = 1; j <= m; ++j) {
    IntervalProbe probe;
    probe.index = static_cast<int>(j);
    probe.lo = t_grid[j - 1];
    probe.hi = t_grid[j];
    const double t_mid = 0.5 * (probe.lo + probe.hi);
    const Vec x_mid = line.point_at(t_mid);
    const double f_mid = oracle.query(x_mid);

    const double slope = (f_grid[j] - f_grid[j - 1]) / (probe.hi - probe.lo);
    probe.intercept = f_mid - slope * t_mid;
    probe.valid = std::abs(f_mid - 0.5 * (f_grid[j - 1] + f_grid[j])) <=
                  kStraddleTol * (1.0 + std::abs(f_mid));
    probe.grad = gradient_with_base(oracle, x_mid, f_mid, s.alpha_fd, dir_rng);
    probes.push_back(std::move(probe));
  }
  run.queries_used = oracle.query_count() - count_before;

  // Group valid probes by value: probes inside the same linear piece carry
  // identical (gradient, intercept), so pair formation over group
  // representatives yields the same candidate values as all m(m-1) probe
  // pairs without the quadratic blowup.
  struct Group {
    Vec grad;
    double intercept;
    int first_index;
  };
  std::vector<Group> groups;
  for (const IntervalProbe& probe : probes) {
    if (!probe.valid) continue;
    ++run.valid_probes;
    bool found = false;
    for (const Group& g : groups) {
      if ((g.grad - probe.grad).lpNorm<Eigen::Infinity>() <= kProbeGroupTol &&
          std::abs(g.intercept - probe.intercept) <= kProbeGroupTol) {
        found = true;
        break;
      }
    }
    if (!found) groups.push_back({probe.grad, probe.intercept, probe.index});
  }
  run.probe_groups = static_cast<int>(groups.size());

  const double k = p.k_bound;
  const double w_cap = k * p.R_bound;
  const double b_cap = p.c_filter * s.Delta * k * k * p.R_bound *
                           std::sqrt(std::log(k / p.delta_conf)) +
                       k * p.B_bound;

  run.candidates.dim = d;
  for (const Group& ga : groups) {
    for (const Group& gb : groups) {
      if (&ga == &gb) continue;
      Candidate cand;
      cand.w = ga.grad - gb.grad;
      // The probe intercepts live in line coordinates; translating by
      // <dw, x0> converts the difference into the neuron's bias in input
      // coordinates.
      cand.b = cand.w.dot(line.x0) - (ga.intercept - gb.intercept);
      cand.src_i = ga.first_index;
      cand.src_j = gb.first_index;

      if (cand.w.norm() > w_cap || std::abs(cand.b) > b_cap) {
        ++run.filtered_out;
        continue;
      }
      if (std::max(cand.w.lpNorm<Eigen::Infinity>(), std::abs(cand.b)) <=
          kDedupTol)
        continue;  // zero candidate
      bool duplicate = false;
      for (const Candidate& kept : run.candidates.entries) {
        if (joint_inf_dist(kept.w, kept.b, cand.w, cand.b) <= kDedupTol) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) run.candidates.entries.push_back(std::move(cand));
    }
  }
  return run;
}

MultiLineExtraction get_neurons_lines(Oracle& oracle,
                                      const ExtractionParams& p, uint64_t seed,
                                      int n_lines) {
  if (n_lines < 1) throw InputError("get_neurons_lines: need >= 1 line");
  MultiLineExtraction multi;
  multi.merged.dim = oracle.dim();
  for (int line = 0; line < n_lines; ++line) {
    ExtractionRun run =
        get_neurons(oracle, p, derive_seed(seed, 100 + line));
    multi.queries_used += run.queries_used;
    for (const Candidate& cand : run.candidates.entries) {
      bool duplicate = false;
      for (const Candidate& kept : multi.merged.entries) {
        if (joint_inf_dist(kept.w, kept.b, cand.w, cand.b) <= kDedupTol) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) {
        Candidate tagged = cand;
        tagged.line = line;
        multi.merged.entries.push_back(std::move(tagged));
      }
    }
    multi.runs.push_back(std::move(run));
  }
  return multi;
}

namespace {

nlohmann::json candidate_entry_json(const Candidate& c, bool with_line) {
  nlohmann::json w = nlohmann::json::array();
  for (int i = 0; i < c.w.size(); ++i) w.push_back(c.w[i]);
  nlohmann::json provenance;
  if (with_line)
    provenance = {c.line, c.src_i, c.src_j};
  else
    provenance = {c.src_i, c.src_j};
  return {{"w", w}, {"b", c.b}, {"provenance", provenance}};
}

nlohmann::json line_json(const GaussianLine& line) {
  nlohmann::json x0 = nlohmann::json::array(), v = nlohmann::json::array();
  for (int i = 0; i < line.x0.size(); ++i) {
    x0.push_back(line.x0[i]);
    v.push_back(line.v[i]);
  }
  return {{"x0", x0}, {"v", v}, {"seed", line.seed}};
}

nlohmann::json schedule_json(const Schedule& s) {
  return {{"Delta", s.Delta},
          {"r", s.r},
          {"tau", s.tau},
          {"alpha_fd", s.alpha_fd},
          {"m", s.m}};
}

}  // namespace

std::string candidates_to_json(const MultiLineExtraction& multi) {
  using nlohmann::json;
  json doc;
  doc["format"] = "relu-candidates";
  doc["version"] = 1;
  doc["dim"] = multi.merged.dim;
  json lines = json::array();
  for (const ExtractionRun& run : multi.runs) {
    json entry;
    entry["line"] = line_json(run.line);
    entry["schedule"] = schedule_json(run.schedule);
    entry["queries_used"] = run.queries_used;
    entry["valid_probes"] = run.valid_probes;
    entry["probe_groups"] = run.probe_groups;
    lines.push_back(entry);
  }
  doc["lines"] = lines;
  doc["queries_used"] = multi.queries_used;
  json entries = json::array();
  for (const Candidate& c : multi.merged.entries)
    entries.push_back(candidate_entry_json(c, true));
  doc["entries"] = entries;
  return doc.dump(2) + "\n";
}

std::string candidates_to_json(const ExtractionRun& run) {
  using nlohmann::json;
  json doc;
  doc["format"] = "relu-candidates";
  doc["version"] = 1;
  doc["dim"] = run.candidates.dim;
  doc["line"] = line_json(run.line);
  doc["schedule"] = schedule_json(run.schedule);
  doc["queries_used"] = run.queries_used;
  doc["valid_probes"] = run.valid_probes;
  doc["probe_groups"] = run.probe_groups;
  json entries = json::array();
  for (const Candidate& c : run.candidates.entries)
    entries.push_back(candidate_entry_json(c, false));
  doc["entries"] = entries;
  return doc.dump(2) + "\n";
}

}  // namespace relux
