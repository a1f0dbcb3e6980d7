#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "relux/distance.hpp"
#include "relux/errors.hpp"
#include "relux/geometry.hpp"
#include "relux/harness.hpp"
#include "relux/rng.hpp"
#include "test_helpers.hpp"

using namespace relux;

namespace {

ExperimentConfig small_config(uint64_t seed) {
  ExperimentConfig cfg;
  TargetSpec t;
  t.kind = TargetKind::RandomSeparated;
  t.dim = 4;
  t.k = 2;
  t.R = 2.0;
  t.B = 1.0;
  t.seed = 21;
  cfg.target = t;
  cfg.extraction.epsilon = 0.05;
  cfg.extraction.delta_conf = 0.1;
  cfg.extraction.k_bound = 2;
  cfg.extraction.R_bound = 2.0;
  cfg.extraction.B_bound = 1.0;
  cfg.regression.n_samples = 3000;
  cfg.seed = seed;
  cfg.mc_samples = 20000;
  return cfg;
}

}  // namespace

TEST_CASE("bump target matches its closed form") {
  TargetSpec spec;
  spec.kind = TargetKind::Bump;
  spec.bump_a = 0.0;
  spec.bump_delta = 1.0;
  const Network net = generate_target(spec);
  REQUIRE(net.dim == 1);
  REQUIRE(net.size() == 3);
  auto relu = [](double z) { return std::max(0.0, z); };
  for (double x = -2.0; x <= 3.0; x += 0.01) {
    const double expected = relu(x) + relu(x - 1.0) - relu(2.0 * x - 1.0);
    CHECK(evaluate(net, Vec::Constant(1, x)) == doctest::Approx(expected));
  }
}

TEST_CASE("separated targets respect their predicate and bounds") {
  TargetSpec spec;
  spec.kind = TargetKind::RandomSeparated;
  spec.dim = 6;
  spec.k = 5;
  spec.R = 2.0;
  spec.B = 1.5;
  spec.seed = 2;
  const Network net = generate_target(spec);
  REQUIRE(net.size() == 5);
  for (int i = 0; i < net.size(); ++i) {
    CHECK(net.neurons[i].w.norm() <= spec.R + 1e-12);
    CHECK(std::abs(net.neurons[i].bias) <= spec.B + 1e-12);
  }
  // the separation predicate, re-checked exhaustively
  for (int i = 0; i < net.size(); ++i)
    for (int j = i + 1; j < net.size(); ++j) {
      const Vec& a = net.neurons[i].w;
      const Vec& b = net.neurons[j].w;
      const double cosv =
          std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
      CHECK(std::sqrt(1.0 - cosv * cosv) >= spec.min_sin - 1e-12);
    }
}

TEST_CASE("separation in dimension 1 is rejected") {
  TargetSpec spec;
  spec.kind = TargetKind::RandomSeparated;
  spec.dim = 1;
  spec.k = 2;
  CHECK_THROWS_AS(generate_target(spec), InputError);
}

TEST_CASE("cancelling pair evaluates to zero everywhere") {
  TargetSpec spec;
  spec.kind = TargetKind::CancellingPair;
  spec.dim = 5;
  spec.R = 2.0;
  spec.B = 2.0;
  spec.seed = 77;
  const Network net = generate_target(spec);
  Rng rng(1);
  for (int i = 0; i < 200; ++i)
    CHECK(evaluate(net, rng.normal_vector(5)) == 0.0);
  const McEstimate mc = l2_distance_mc(net, Network::empty(5), 1000, 3);
  CHECK(mc.estimate == 0.0);
}

TEST_CASE("clumped targets: cluster members are pairwise close") {
  TargetSpec spec;
  spec.kind = TargetKind::RandomClumped;
  spec.dim = 5;
  spec.k = 6;
  spec.R = 2.0;
  spec.B = 1.0;
  spec.clusters = 2;
  spec.clump_delta = 1e-3;
  spec.clump_alpha = 1e-3;
  spec.seed = 8;
  const Network net = generate_target(spec);
  REQUIRE(net.size() == 6);
  // members i and i+clusters share a cluster; triangle inequality widens the
  // pairwise budget to (2 delta, 4 alpha)
  const ClosenessParams pairwise{2.0 * spec.clump_delta,
                                 4.0 * spec.clump_alpha};
  for (int i = 0; i + spec.clusters < net.size(); ++i) {
    const WeightBias a{net.neurons[i].w, net.neurons[i].bias};
    const WeightBias b{net.neurons[i + spec.clusters].w,
                       net.neurons[i + spec.clusters].bias};
    CHECK(is_close(a, b, pairwise));
  }
}

TEST_CASE("config serialization round trips") {
  ExperimentConfig cfg = small_config(5);
  cfg.loss_threshold = 0.05;
  cfg.query_budget = 1000000;
  const std::string text = config_to_json(cfg);
  const ExperimentConfig back = config_from_json(text);
  CHECK(config_to_json(back) == text);
  CHECK(config_hash(back) == config_hash(cfg));
  ExperimentConfig other = cfg;
  other.seed += 1;
  CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("run_experiment is reproducible and scores against ground truth") {
  const ExperimentConfig cfg = small_config(31);
  const RunReport first = run_experiment(cfg);
  REQUIRE(first.ok());
  const RunReport second = run_experiment(cfg);
  CHECK(first.mc_loss == second.mc_loss);
  CHECK(first.mc_std_error == second.mc_std_error);
  CHECK(first.learn.query_count == second.learn.query_count);
  CHECK(first.learn.train_loss == second.learn.train_loss);
  CHECK(first.learn.candidate_count == second.learn.candidate_count);
  CHECK(first.mc_loss <= 0.05);
  CHECK(first.mc_std_error > 0.0);
}

TEST_CASE("run_experiment records stage failures instead of throwing") {
  ExperimentConfig cfg = small_config(32);
  cfg.query_budget = 10;  // absurdly small
  const RunReport report = run_experiment(cfg);
  CHECK_FALSE(report.ok());
  CHECK(report.error_stage == "get_neurons");
  CHECK(!report.error_message.empty());
}

TEST_CASE("wire transport reproduces the in-process run") {
  ExperimentConfig cfg = small_config(33);
  const RunReport local = run_experiment(cfg);
  cfg.transport = "tcp";
  const RunReport remote = run_experiment(cfg);
  REQUIRE(local.ok());
  REQUIRE(remote.ok());
  CHECK(local.mc_loss == remote.mc_loss);
  CHECK(local.learn.train_loss == remote.learn.train_loss);
  CHECK(local.learn.query_count == remote.learn.query_count);
}

TEST_CASE("reports append under their config hash and reload") {
  ExperimentConfig cfg = small_config(34);
  const std::string dir =
      (std::filesystem::temp_directory_path() / "relux-report-test").string();
  std::filesystem::remove_all(dir);
  cfg.out_dir = dir;
  const RunReport first = run_experiment(cfg);
  const RunReport second = run_experiment(cfg);
  const auto loaded = load_reports(dir);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].config_hash == first.config_hash);
  CHECK(loaded[1].seed == second.seed);
  const auto filtered = load_reports(dir, first.config_hash);
  CHECK(filtered.size() == 2);
  const auto none = load_reports(dir, "deadbeef");
  CHECK(none.empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep shares the target and varies exactly one knob") {
  ExperimentConfig cfg = small_config(35);
  cfg.regression.n_samples = 1500;
  cfg.mc_samples = 5000;
  const std::vector<double> values = {2500.0, 5000.0};
  const auto reports = sweep(cfg, "c_r", values);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].ok());
  CHECK(reports[1].ok());
  CHECK(reports[0].knobs.at("c_r") == 2500.0);
  CHECK(reports[1].knobs.at("c_r") == 5000.0);
  // coarser grid, fewer queries
  CHECK(reports[1].learn.query_count < reports[0].learn.query_count);
  const std::string csv = sweep_csv("c_r", values, reports);
  CHECK(csv.find("c_r,mc_loss") == 0);
  CHECK_THROWS_AS(sweep(cfg, "no-such-knob", values), InputError);
}
