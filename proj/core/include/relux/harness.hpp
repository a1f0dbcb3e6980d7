#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relux/extraction.hpp"
#include "relux/network.hpp"
#include "relux/regression.hpp"

namespace relux {

enum class TargetKind { RandomSeparated, RandomClumped, Bump, CancellingPair };

std::string to_string(TargetKind kind);
TargetKind target_kind_from_string(const std::string& name);

struct TargetSpec {
  TargetKind kind = TargetKind::RandomSeparated;
  int dim = 2;
  int k = 1;
  double R = 1.0;
  double B = 1.0;
  uint64_t seed = 0;

  double min_sin = 0.2;       // separated: pairwise |sin(angle)| floor
  double clump_delta = 1e-3;  // clumped: closeness of members to a center
  double clump_alpha = 1e-3;
  int clusters = 1;
  double bump_a = 0.0;  // bump: F(x) = relu(x-a) + relu(x-a-delta)
  double bump_delta = 1.0;  //       - relu(2x - 2a - delta), dim 1
};

/// Deterministic target construction per kind; throws InputError for
/// infeasible requests (e.g. angular separation in dimension 1).
Network generate_target(const TargetSpec& spec);

struct ExperimentConfig {
  std::optional<TargetSpec> target;       // generate...
  std::optional<std::string> target_path;  // ...or load; exactly one set
  ExtractionParams extraction;
  RegressionConfig regression;
  uint64_t seed = 0;
  std::string transport = "in-process";  // or "tcp"
  std::string listen_addr = "127.0.0.1:0";
  std::optional<uint64_t> query_budget;
  int64_t mc_samples = 100'000;
  std::optional<double> loss_threshold;
  std::string out_dir;  // report files land here when nonempty

  void validate() const;
};

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// FNV-1a of the canonical config serialization; keys report files.
std::string config_hash(const ExperimentConfig& cfg);

struct RunReport {
  std::string config_hash;
  uint64_t seed = 0;
  std::string transport;
  LearnReport learn;
  double mc_loss = 0.0;
  double mc_std_error = 0.0;
  int64_t mc_samples = 0;
  std::map<std::string, double> knobs;
  std::string error_stage;    // empty on success
  std::string error_message;  // empty on success

  bool ok() const { return error_stage.empty(); }
};

std::string report_to_json(const RunReport& report);
std::string report_table_header();
std::string report_table_row(const RunReport& report);

/// Generates/loads the target, wraps it in the configured oracle (in-process
/// or a spawned wire server), runs the learning pipeline, and scores the
/// result against ground truth by Monte-Carlo population loss.  Stage
/// failures are captured in the report rather than thrown; the partial
/// report is still written.
RunReport run_experiment(const ExperimentConfig& cfg);

/// One run per value of the named knob, sharing the target and base seed.
/// Knob names: epsilon, delta, poly_const, c_r, c_tau, c_alpha, c_filter,
/// n_samples, mc_samples.
std::vector<RunReport> sweep(const ExperimentConfig& cfg,
                             const std::string& knob,
                             const std::vector<double>& values);

std::string sweep_csv(const std::string& knob,
                      const std::vector<double>& values,
                      const std::vector<RunReport>& reports);

/// Reads every report line from `{out_dir}/run-{hash}.jsonl` files.
std::vector<RunReport> load_reports(const std::string& out_dir,
                                    const std::string& hash_filter = "");

}  // namespace relux
