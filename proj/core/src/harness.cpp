#include "relux/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "relux/distance.hpp"
#include "relux/errors.hpp"
#include "relux/geometry.hpp"
#include "relux/model_io.hpp"
#include "relux/rng.hpp"
#include "relux/wire.hpp"

namespace relux {

using nlohmann::json;

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::RandomSeparated:
      return "random-separated";
    case TargetKind::RandomClumped:
      return "random-clumped";
    case TargetKind::Bump:
      return "bump";
    case TargetKind::CancellingPair:
      return "cancelling-pair";
  }
  throw InputError("unknown target kind");
}

TargetKind target_kind_from_string(const std::string& name) {
  if (name == "random-separated") return TargetKind::RandomSeparated;
  if (name == "random-clumped") return TargetKind::RandomClumped;
  if (name == "bump") return TargetKind::Bump;
  if (name == "cancelling-pair") return TargetKind::CancellingPair;
  throw InputError("unknown target kind \"" + name + "\"");
}

namespace {

double sin_angle(const Vec& a, const Vec& b) {
  const double c = std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
  return std::sqrt(std::max(0.0, 1.0 - c * c));
}

Network generate_separated(const TargetSpec& spec, Rng& rng) {
  if (spec.dim < 2 && spec.k > 1 && spec.min_sin > 0.0)
    throw InputError(
        "random-separated: angular separation needs dimension >= 2");
  Network net;
  net.dim = spec.dim;
  int attempts = 0;
  while (net.size() < spec.k) {
    if (++attempts > 10000 * spec.k)
      throw ResourceError(
          "random-separated: could not satisfy the separation predicate");
    Neuron n;
    n.sign = rng.sign();
    n.w = rng.uniform(spec.R / 2.0, spec.R) * rng.unit_vector(spec.dim);
    n.bias = rng.uniform(-spec.B, spec.B);
    bool separated = true;
    for (const Neuron& other : net.neurons)
      if (sin_angle(n.w, other.w) < spec.min_sin) {
        separated = false;
        break;
      }
    if (separated) net.neurons.push_back(std::move(n));
  }
  return net;
}

Network generate_clumped(const TargetSpec& spec, Rng& rng) {
  const int clusters = std::max(1, std::min(spec.clusters, spec.k));
  Network net;
  net.dim = spec.dim;
  const double delta = spec.clump_delta;
  const double alpha = spec.clump_alpha;

  std::vector<WeightBias> centers;
  int attempts = 0;
  while (static_cast<int>(centers.size()) < clusters) {
    if (++attempts > 10000 * clusters)
      throw ResourceError("random-clumped: could not place cluster centers");
    WeightBias c;
    c.v = rng.uniform(spec.R / 3.0, spec.R / 1.6) * rng.unit_vector(spec.dim);
    c.b = rng.uniform(-spec.B / 1.6, spec.B / 1.6);
    bool ok = true;
    for (const WeightBias& other : centers)
      if (spec.dim >= 2 && sin_angle(c.v, other.v) < spec.min_sin) ok = false;
    if (ok) centers.push_back(std::move(c));
  }

  for (int i = 0; i < spec.k; ++i) {
    const WeightBias& center = centers[i % clusters];
    const double center_norm = center.v.norm();
    // Angle cap keeps both closeness conditions satisfiable with slack.
    double sin_cap = 0.9 * delta;
    if (std::abs(center.b) > 0.0)
      sin_cap = std::min(sin_cap, 0.7 * alpha * center_norm /
                                      std::abs(center.b));
    const double sin_theta = rng.uniform(0.0, sin_cap);
    const double cos_theta = std::sqrt(1.0 - sin_theta * sin_theta);

    Vec perp = Vec::Zero(spec.dim);
    if (spec.dim >= 2) {
      const Vec raw = rng.unit_vector(spec.dim);
      perp = raw - raw.dot(center.v) / center.v.squaredNorm() * center.v;
      const double pn = perp.norm();
      perp = pn > 1e-12 ? Vec(perp / pn) : Vec(Vec::Zero(spec.dim));
    }

    const double gamma = rng.uniform(0.5, 1.5);
    Neuron n;
    n.sign = rng.sign();
    n.w = gamma * (cos_theta * center.v + sin_theta * center_norm * perp);
    const double slack = std::sqrt(std::max(
        0.0, alpha * alpha * center_norm * center_norm -
                 center.b * center.b * sin_theta * sin_theta));
    n.bias = gamma * (cos_theta * center.b + rng.uniform(-0.9, 0.9) * slack);
    if (!is_close({n.w, n.bias}, center, {delta, alpha}))
      throw InconsistencyError(
          "random-clumped: generated member escaped its closeness budget");
    net.neurons.push_back(std::move(n));
  }
  return net;
}

Network generate_bump(const TargetSpec& spec) {
  Network net;
  net.dim = 1;
  const double a = spec.bump_a;
  const double delta = spec.bump_delta;
  if (!(delta > 0.0)) throw InputError("bump: width must be positive");
  Neuron left{+1.0, Vec::Constant(1, 1.0), a, std::nullopt};
  Neuron right{+1.0, Vec::Constant(1, 1.0), a + delta, std::nullopt};
  Neuron center{-1.0, Vec::Constant(1, 2.0), 2.0 * a + delta, std::nullopt};
  net.neurons = {left, right, center};
  return net;
}

Network generate_cancelling_pair(const TargetSpec& spec, Rng& rng) {
  Network net;
  net.dim = spec.dim;
  Neuron plus;
  plus.sign = 1.0;
  plus.w = rng.uniform(spec.R / 2.0, spec.R) * rng.unit_vector(spec.dim);
  plus.bias = rng.uniform(-spec.B, spec.B);
  Neuron minus = plus;
  minus.sign = -1.0;
  net.neurons = {plus, minus};
  return net;
}

}  // namespace

Network generate_target(const TargetSpec& spec) {
  if (spec.dim < 1) throw InputError("target: dimension must be >= 1");
  if (spec.k < 0) throw InputError("target: k must be >= 0");
  if (!(spec.R > 0.0) || !(spec.B > 0.0))
    throw InputError("target: R and B must be positive");
  Rng rng(derive_seed(spec.seed, 0x7a67));
  Network net;
  switch (spec.kind) {
    case TargetKind::RandomSeparated:
      net = generate_separated(spec, rng);
      break;
    case TargetKind::RandomClumped:
      net = generate_clumped(spec, rng);
      break;
    case TargetKind::Bump:
      net = generate_bump(spec);
      break;
    case TargetKind::CancellingPair:
      net = generate_cancelling_pair(spec, rng);
      break;
  }
  net.validate();
  return net;
}

void ExperimentConfig::validate() const {
  if (target.has_value() == target_path.has_value())
    throw InputError("config: exactly one of target / target_path required");
  if (transport != "in-process" && transport != "tcp")
    throw InputError("config: transport must be in-process or tcp");
  if (mc_samples < 2) throw InputError("config: mc_samples must be >= 2");
  extraction.validate();
  regression.validate();
}

namespace {

json target_to_json(const TargetSpec& t) {
  json j;
  j["kind"] = to_string(t.kind);
  j["dim"] = t.dim;
  j["k"] = t.k;
  j["R"] = t.R;
  j["B"] = t.B;
  j["seed"] = t.seed;
  j["min_sin"] = t.min_sin;
  j["clump_delta"] = t.clump_delta;
  j["clump_alpha"] = t.clump_alpha;
  j["clusters"] = t.clusters;
  j["bump_a"] = t.bump_a;
  j["bump_delta"] = t.bump_delta;
  return j;
}

TargetSpec target_from_json(const json& j) {
  TargetSpec t;
  t.kind = target_kind_from_string(j.at("kind").get<std::string>());
  t.dim = j.value("dim", t.dim);
  t.k = j.value("k", t.k);
  t.R = j.value("R", t.R);
  t.B = j.value("B", t.B);
  t.seed = j.value("seed", t.seed);
  t.min_sin = j.value("min_sin", t.min_sin);
  t.clump_delta = j.value("clump_delta", t.clump_delta);
  t.clump_alpha = j.value("clump_alpha", t.clump_alpha);
  t.clusters = j.value("clusters", t.clusters);
  t.bump_a = j.value("bump_a", t.bump_a);
  t.bump_delta = j.value("bump_delta", t.bump_delta);
  return t;
}

json extraction_to_json(const ExtractionParams& p) {
  json j;
  j["epsilon"] = p.epsilon;
  j["delta"] = p.delta_conf;
  j["k"] = p.k_bound;
  j["R"] = p.R_bound;
  j["B"] = p.B_bound;
  j["poly_const"] = p.poly_const;
  j["c_r"] = p.c_r;
  j["c_tau"] = p.c_tau;
  j["c_alpha"] = p.c_alpha;
  j["c_filter"] = p.c_filter;
  if (p.m_cap) j["m_cap"] = *p.m_cap;
  return j;
}

ExtractionParams extraction_from_json(const json& j) {
  ExtractionParams p;
  p.epsilon = j.at("epsilon").get<double>();
  p.delta_conf = j.at("delta").get<double>();
  p.k_bound = j.at("k").get<int>();
  p.R_bound = j.at("R").get<double>();
  p.B_bound = j.at("B").get<double>();
  p.poly_const = j.value("poly_const", p.poly_const);
  p.c_r = j.value("c_r", p.c_r);
  p.c_tau = j.value("c_tau", p.c_tau);
  p.c_alpha = j.value("c_alpha", p.c_alpha);
  p.c_filter = j.value("c_filter", p.c_filter);
  if (j.contains("m_cap")) p.m_cap = j["m_cap"].get<uint64_t>();
  return p;
}

json regression_to_json(const RegressionConfig& r) {
  json j = json::object();
  if (r.n_samples) j["n_samples"] = *r.n_samples;
  if (r.W_bound) j["W_bound"] = *r.W_bound;
  if (r.M_bound) j["M_bound"] = *r.M_bound;
  j["solver_tol"] = r.solver_tol;
  return j;
}

RegressionConfig regression_from_json(const json& j) {
  RegressionConfig r;
  if (j.contains("n_samples")) r.n_samples = j["n_samples"].get<int64_t>();
  if (j.contains("W_bound")) r.W_bound = j["W_bound"].get<double>();
  if (j.contains("M_bound")) r.M_bound = j["M_bound"].get<double>();
  r.solver_tol = j.value("solver_tol", r.solver_tol);
  return r;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  if (cfg.target) j["target"] = target_to_json(*cfg.target);
  if (cfg.target_path) j["target_path"] = *cfg.target_path;
  j["extraction"] = extraction_to_json(cfg.extraction);
  j["regression"] = regression_to_json(cfg.regression);
  j["seed"] = cfg.seed;
  j["transport"] = cfg.transport;
  j["listen_addr"] = cfg.listen_addr;
  if (cfg.query_budget) j["query_budget"] = *cfg.query_budget;
  j["mc_samples"] = cfg.mc_samples;
  if (cfg.loss_threshold) j["loss_threshold"] = *cfg.loss_threshold;
  if (!cfg.out_dir.empty()) j["out_dir"] = cfg.out_dir;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  if (j.contains("target")) cfg.target = target_from_json(j["target"]);
  if (j.contains("target_path"))
    cfg.target_path = j["target_path"].get<std::string>();
  cfg.extraction = extraction_from_json(j.at("extraction"));
  if (j.contains("regression"))
    cfg.regression = regression_from_json(j["regression"]);
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.transport = j.value("transport", cfg.transport);
  cfg.listen_addr = j.value("listen_addr", cfg.listen_addr);
  if (j.contains("query_budget"))
    cfg.query_budget = j["query_budget"].get<uint64_t>();
  cfg.mc_samples = j.value("mc_samples", cfg.mc_samples);
  if (j.contains("loss_threshold"))
    cfg.loss_threshold = j["loss_threshold"].get<double>();
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string canon = config_to_json(cfg);
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string report_to_json(const RunReport& r) {
  json j;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  j["transport"] = r.transport;
  j["schedule"] = {{"Delta", r.learn.schedule.Delta},
                   {"r", r.learn.schedule.r},
                   {"tau", r.learn.schedule.tau},
                   {"alpha_fd", r.learn.schedule.alpha_fd},
                   {"m", r.learn.schedule.m}};
  j["query_count"] = r.learn.query_count;
  j["candidates"] = r.learn.candidate_count;
  j["n_train"] = r.learn.n_train;
  j["n_holdout"] = r.learn.n_holdout;
  j["W_bound"] = r.learn.W_bound;
  j["M_bound"] = r.learn.M_bound;
  j["train_loss"] = r.learn.train_loss;
  j["holdout_loss"] = r.learn.holdout_loss;
  j["rejection_rate"] = r.learn.train_rejection_rate;
  j["truncation_warning"] = r.learn.truncation_warning;
  j["mc_loss"] = r.mc_loss;
  j["mc_std_error"] = r.mc_std_error;
  j["mc_samples"] = r.mc_samples;
  j["wall_extract_s"] = r.learn.wall_extract_s;
  j["wall_regress_s"] = r.learn.wall_regress_s;
  j["wall_total_s"] = r.learn.wall_total_s;
  j["knobs"] = r.knobs;
  j["error_stage"] = r.error_stage;
  j["error_message"] = r.error_message;
  return j.dump();
}

std::string report_table_header() {
  return "seed        transport   queries      |S|  mc_loss      +-se         "
         "status";
}

std::string report_table_row(const RunReport& r) {
  std::ostringstream os;
  os.setf(std::ios::left);
  os.width(12);
  os << r.seed;
  os.width(12);
  os << r.transport;
  os.width(13);
  os << r.learn.query_count;
  os.width(5);
  os << r.learn.candidate_count;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-13.4e", r.mc_loss);
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-13.1e", r.mc_std_error);
  os << buf;
  os << (r.ok() ? "ok" : ("error:" + r.error_stage));
  return os.str();
}

namespace {

std::string extract_stage(const std::string& message) {
  // learn_from_queries prefixes stage failures with "stage=<name>: ".
  if (message.rfind("stage=", 0) == 0) {
    const size_t colon = message.find(':');
    if (colon != std::string::npos) return message.substr(6, colon - 6);
  }
  return "run";
}

void append_report(const ExperimentConfig& cfg, const RunReport& report) {
  if (cfg.out_dir.empty()) return;
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path =
      cfg.out_dir + "/run-" + report.config_hash + ".jsonl";
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append report: " + path);
  out << report_to_json(report) << "\n";
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunReport report;
  report.config_hash = config_hash(cfg);
  report.seed = cfg.seed;
  report.transport = cfg.transport;
  report.knobs = {{"poly_const", cfg.extraction.poly_const},
                  {"c_r", cfg.extraction.c_r},
                  {"c_tau", cfg.extraction.c_tau},
                  {"c_alpha", cfg.extraction.c_alpha},
                  {"c_filter", cfg.extraction.c_filter}};

  try {
    const Network target = cfg.target ? generate_target(*cfg.target)
                                      : load_network(*cfg.target_path);

    std::unique_ptr<OracleServer> server;
    std::unique_ptr<Oracle> oracle;
    if (cfg.transport == "tcp") {
      server = std::make_unique<OracleServer>(target, cfg.listen_addr);
      oracle =
          std::make_unique<RemoteOracle>(server->address(), cfg.query_budget);
    } else {
      oracle = std::make_unique<InProcessOracle>(target, cfg.query_budget);
    }

    const LearnResult result = learn_from_queries(
        *oracle, cfg.extraction, cfg.regression, cfg.seed);
    report.learn = result.report;

    const McEstimate mc =
        l2_distance_mc(target, result.model, cfg.mc_samples,
                       derive_seed(cfg.seed, 0x6d63));
    report.mc_loss = mc.estimate;
    report.mc_std_error = mc.std_error;
    report.mc_samples = cfg.mc_samples;
  } catch (const Error& e) {
    report.error_message = e.what();
    report.error_stage = extract_stage(report.error_message);
  }

  append_report(cfg, report);
  return report;
}

std::vector<RunReport> sweep(const ExperimentConfig& cfg,
                             const std::string& knob,
                             const std::vector<double>& values) {
  std::vector<RunReport> reports;
  reports.reserve(values.size());
  for (double value : values) {
    ExperimentConfig step = cfg;  // shared target spec and base seed
    if (knob == "epsilon") {
      step.extraction.epsilon = value;
    } else if (knob == "delta") {
      step.extraction.delta_conf = value;
    } else if (knob == "n_samples") {
      step.regression.n_samples = static_cast<int64_t>(value);
    } else if (knob == "mc_samples") {
      step.mc_samples = static_cast<int64_t>(value);
    } else if (double* slot = step.extraction.knob(knob)) {
      *slot = value;
    } else {
      throw InputError("sweep: unknown knob \"" + knob + "\"");
    }
    reports.push_back(run_experiment(step));
  }
  return reports;
}

std::string sweep_csv(const std::string& knob,
                      const std::vector<double>& values,
                      const std::vector<RunReport>& reports) {
  std::ostringstream os;
  os << knob << ",mc_loss,mc_std_error,queries,candidates,status\n";
  for (size_t i = 0; i < reports.size(); ++i) {
    const RunReport& r = reports[i];
    os << values[i] << "," << r.mc_loss << "," << r.mc_std_error << ","
       << r.learn.query_count << "," << r.learn.candidate_count << ","
       << (r.ok() ? "ok" : r.error_stage) << "\n";
  }
  return os.str();
}

std::vector<RunReport> load_reports(const std::string& out_dir,
                                    const std::string& hash_filter) {
  std::vector<RunReport> reports;
  if (!std::filesystem::is_directory(out_dir)) return reports;
  for (const auto& entry : std::filesystem::directory_iterator(out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("run-", 0) != 0 || entry.path().extension() != ".jsonl")
      continue;
    if (!hash_filter.empty() &&
        name != "run-" + hash_filter + ".jsonl")
      continue;
    std::ifstream in(entry.path());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;
      RunReport r;
      r.config_hash = j.value("config_hash", "");
      r.seed = j.value("seed", uint64_t{0});
      r.transport = j.value("transport", "");
      r.learn.query_count = j.value("query_count", uint64_t{0});
      r.learn.candidate_count = j.value("candidates", 0);
      r.mc_loss = j.value("mc_loss", 0.0);
      r.mc_std_error = j.value("mc_std_error", 0.0);
      r.mc_samples = j.value("mc_samples", int64_t{0});
      r.error_stage = j.value("error_stage", "");
      r.error_message = j.value("error_message", "");
      reports.push_back(std::move(r));
    }
  }
  return reports;
}

}  // namespace relux
