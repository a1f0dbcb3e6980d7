// relux: extract one-hidden-layer ReLU networks from black-box queries.
//
// Subcommands: gen, serve, extract, learn, evaluate, run, sweep, report.

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include "relux/distance.hpp"
#include "relux/errors.hpp"
#include "relux/extraction.hpp"
#include "relux/harness.hpp"
#include "relux/model_io.hpp"
#include "relux/regression.hpp"
#include "relux/wire.hpp"

namespace {

using namespace relux;

std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop.store(true); }

struct OracleHandle {
  std::unique_ptr<Oracle> oracle;
};

/// --oracle accepts file:PATH (in-process over a model file) or tcp:ADDR.
OracleHandle open_oracle(const std::string& spec,
                         std::optional<uint64_t> budget) {
  OracleHandle h;
  if (spec.rfind("file:", 0) == 0) {
    h.oracle = std::make_unique<InProcessOracle>(
        load_network(spec.substr(5)), budget);
  } else if (spec.rfind("tcp:", 0) == 0) {
    h.oracle = std::make_unique<RemoteOracle>(spec.substr(4), budget);
  } else {
    throw InputError("--oracle must be file:PATH or tcp:ADDR");
  }
  return h;
}

void apply_knobs(ExtractionParams& params,
                 const std::vector<std::string>& knobs) {
  for (const std::string& item : knobs) {
    const size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw InputError("--knob expects NAME=VALUE, got \"" + item + "\"");
    const std::string name = item.substr(0, eq);
    double* slot = params.knob(name);
    if (!slot) throw InputError("unknown knob \"" + name + "\"");
    *slot = std::stod(item.substr(eq + 1));
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
}

int cmd_gen(const TargetSpec& spec, const std::string& out) {
  const Network net = generate_target(spec);
  save_network(net, out);
  std::cout << "wrote " << out << " (dim " << net.dim << ", " << net.size()
            << " neurons)\n";
  return 0;
}

int cmd_serve(const std::string& model, const std::string& listen,
              std::optional<uint64_t> budget) {
  OracleServer server(load_network(model), listen, budget);
  std::cout << "serving " << model << " on " << server.address() << std::endl;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_stop.load())
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.shutdown();
  std::cout << "served " << server.query_count() << " queries\n";
  return 0;
}

int cmd_extract(const std::string& oracle_spec, ExtractionParams params,
                const std::vector<std::string>& knobs, uint64_t seed,
                int lines, const std::string& out,
                const std::string& report_path,
                std::optional<uint64_t> budget) {
  apply_knobs(params, knobs);
  OracleHandle h = open_oracle(oracle_spec, budget);
  const auto t0 = std::chrono::steady_clock::now();
  Schedule sched;
  int candidates = 0;
  uint64_t queries = 0;
  if (lines <= 1) {
    const ExtractionRun run = get_neurons(*h.oracle, params, seed);
    write_file(out, candidates_to_json(run));
    sched = run.schedule;
    candidates = run.candidates.size();
    queries = run.queries_used;
  } else {
    const MultiLineExtraction multi =
        get_neurons_lines(*h.oracle, params, seed, lines);
    write_file(out, candidates_to_json(multi));
    sched = multi.runs.front().schedule;
    candidates = multi.merged.size();
    queries = multi.queries_used;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  std::ostringstream rep;
  rep << "{\"m\": " << sched.m << ", \"r\": " << sched.r
      << ", \"tau\": " << sched.tau << ", \"Delta\": " << sched.Delta
      << ", \"alpha_fd\": " << sched.alpha_fd << ", \"lines\": " << lines
      << ", \"candidates\": " << candidates << ", \"queries\": " << queries
      << ", \"wall_s\": " << wall << "}\n";
  if (report_path.empty())
    std::cout << rep.str();
  else
    write_file(report_path, rep.str());
  return 0;
}

int cmd_learn(const std::string& oracle_spec, ExtractionParams params,
              const std::vector<std::string>& knobs, RegressionConfig cfg,
              uint64_t seed, const std::string& out,
              std::optional<uint64_t> budget) {
  apply_knobs(params, knobs);
  OracleHandle h = open_oracle(oracle_spec, budget);
  const LearnResult result = learn_from_queries(*h.oracle, params, cfg, seed);
  save_network(result.model, out);
  std::cout << "wrote " << out << "\n"
            << "queries " << result.report.query_count << ", |S| "
            << result.report.candidate_count << ", train loss "
            << result.report.train_loss << ", holdout loss "
            << result.report.holdout_loss << ", wall "
            << result.report.wall_total_s << " s\n";
  return 0;
}

int cmd_evaluate(const std::vector<std::string>& models, int64_t samples,
                 uint64_t seed) {
  if (models.size() != 2)
    throw InputError("evaluate needs exactly two --model arguments");
  const Network a = load_network(models[0]);
  const Network b = load_network(models[1]);
  const McEstimate mc = l2_distance_mc(a, b, samples, seed);
  std::printf("mc_loss %.12e +- %.3e (n=%lld)\n", mc.estimate, mc.std_error,
              static_cast<long long>(samples));
  return 0;
}

int cmd_run(ExperimentConfig cfg) {
  const RunReport report = run_experiment(cfg);
  std::cout << report_table_header() << "\n"
            << report_table_row(report) << "\n";
  if (!report.ok()) {
    std::cerr << "stage error: " << report.error_message << "\n";
    return 3;
  }
  if (cfg.loss_threshold && report.mc_loss > *cfg.loss_threshold) {
    std::cerr << "mc loss " << report.mc_loss << " exceeds threshold "
              << *cfg.loss_threshold << "\n";
    return 2;
  }
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& knob,
              const std::vector<double>& values) {
  const std::vector<RunReport> reports = sweep(cfg, knob, values);
  std::cout << sweep_csv(knob, values, reports);
  for (const RunReport& r : reports)
    if (!r.ok()) return 3;
  return 0;
}

int cmd_report(const std::string& dir, const std::string& hash) {
  const std::vector<RunReport> reports = load_reports(dir, hash);
  std::cout << report_table_header() << "\n";
  for (const RunReport& r : reports) std::cout << report_table_row(r) << "\n";
  std::cout << "(" << reports.size() << " runs)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"black-box extraction of one-hidden-layer ReLU networks"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a target network");
  TargetSpec tspec;
  std::string kind_str = "random-separated";
  std::string gen_out = "model.json";
  gen->add_option("--kind", kind_str,
                  "random-separated | random-clumped | bump | cancelling-pair");
  gen->add_option("--dim", tspec.dim);
  gen->add_option("--k", tspec.k);
  gen->add_option("--R", tspec.R);
  gen->add_option("--B", tspec.B);
  gen->add_option("--seed", tspec.seed);
  gen->add_option("--min-sin", tspec.min_sin);
  gen->add_option("--clump-delta", tspec.clump_delta);
  gen->add_option("--clump-alpha", tspec.clump_alpha);
  gen->add_option("--clusters", tspec.clusters);
  gen->add_option("--bump-a", tspec.bump_a);
  gen->add_option("--bump-delta", tspec.bump_delta);
  gen->add_option("--out", gen_out)->required();

  // serve
  auto* serve = app.add_subcommand("serve", "serve a model over the wire protocol");
  std::string serve_model, serve_listen = "127.0.0.1:0";
  uint64_t serve_budget = 0;
  serve->add_option("--model", serve_model)->required();
  serve->add_option("--listen", serve_listen);
  serve->add_option("--budget", serve_budget, "query budget (0 = unlimited)");

  // shared extraction options
  auto add_extraction_options = [](CLI::App* cmd, std::string& oracle,
                                   ExtractionParams& p,
                                   std::vector<std::string>& knobs,
                                   uint64_t& seed, uint64_t& budget) {
    cmd->add_option("--oracle", oracle, "file:PATH or tcp:ADDR")->required();
    cmd->add_option("--epsilon", p.epsilon)->required();
    cmd->add_option("--delta", p.delta_conf)->required();
    cmd->add_option("--k", p.k_bound)->required();
    cmd->add_option("--R", p.R_bound)->required();
    cmd->add_option("--B", p.B_bound)->required();
    cmd->add_option("--knob", knobs, "NAME=VALUE (repeatable)");
    cmd->add_option("--seed", seed);
    cmd->add_option("--budget", budget, "query budget (0 = unlimited)");
  };

  // extract
  auto* extract = app.add_subcommand("extract", "harvest candidate neurons");
  std::string ex_oracle, ex_out = "candidates.json", ex_report;
  ExtractionParams ex_params;
  std::vector<std::string> ex_knobs;
  uint64_t ex_seed = 0, ex_budget = 0;
  int ex_lines = 1;
  add_extraction_options(extract, ex_oracle, ex_params, ex_knobs, ex_seed,
                         ex_budget);
  extract->add_option("--lines", ex_lines,
                      "search lines to union (default 1)");
  extract->add_option("--out", ex_out)->required();
  extract->add_option("--report", ex_report, "report path (default stdout)");

  // learn
  auto* learn = app.add_subcommand("learn", "run the full extraction pipeline");
  std::string ln_oracle, ln_out = "learned.json";
  ExtractionParams ln_params;
  std::vector<std::string> ln_knobs;
  uint64_t ln_seed = 0, ln_budget = 0;
  int64_t ln_n = 0;
  add_extraction_options(learn, ln_oracle, ln_params, ln_knobs, ln_seed,
                         ln_budget);
  learn->add_option("--n", ln_n, "regression sample count (0 = auto)");
  learn->add_option("--out", ln_out)->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Monte-Carlo loss between two models");
  std::vector<std::string> eval_models;
  int64_t eval_samples = 100000;
  uint64_t eval_seed = 0;
  evaluate->add_option("--model", eval_models, "model file (give twice)")
      ->expected(2);
  evaluate->add_option("--samples", eval_samples);
  evaluate->add_option("--seed", eval_seed);

  // run
  auto* run = app.add_subcommand("run", "run one experiment from a config");
  std::string run_config;
  std::string run_transport, run_out_dir;
  int64_t run_mc = 0;
  uint64_t run_seed = 0;
  bool run_seed_set = false;
  double run_threshold = 0.0;
  bool run_threshold_set = false;
  run->add_option("--config", run_config)->required();
  run->add_option("--transport", run_transport, "in-process | tcp");
  run->add_option("--out-dir", run_out_dir);
  run->add_option("--mc-samples", run_mc);
  run->add_option("--seed", run_seed)->each([&](const std::string&) {
    run_seed_set = true;
  });
  run->add_option("--loss-threshold", run_threshold)
      ->each([&](const std::string&) { run_threshold_set = true; });

  // sweep
  auto* swp = app.add_subcommand("sweep", "run one experiment per knob value");
  std::string sw_config, sw_knob;
  std::vector<double> sw_values;
  swp->add_option("--config", sw_config)->required();
  swp->add_option("--knob", sw_knob)->required();
  swp->add_option("--values", sw_values)->required()->delimiter(',');

  // report
  auto* rep = app.add_subcommand("report", "print stored run reports");
  std::string rep_dir, rep_hash;
  rep->add_option("--dir", rep_dir)->required();
  rep->add_option("--hash", rep_hash, "restrict to one config hash");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      tspec.kind = target_kind_from_string(kind_str);
      return cmd_gen(tspec, gen_out);
    }
    if (serve->parsed()) {
      return cmd_serve(serve_model, serve_listen,
                       serve_budget ? std::optional<uint64_t>(serve_budget)
                                    : std::nullopt);
    }
    if (extract->parsed()) {
      return cmd_extract(ex_oracle, ex_params, ex_knobs, ex_seed, ex_lines,
                         ex_out, ex_report,
                         ex_budget ? std::optional<uint64_t>(ex_budget)
                                   : std::nullopt);
    }
    if (learn->parsed()) {
      RegressionConfig cfg;
      if (ln_n > 0) cfg.n_samples = ln_n;
      return cmd_learn(ln_oracle, ln_params, ln_knobs, cfg, ln_seed, ln_out,
                       ln_budget ? std::optional<uint64_t>(ln_budget)
                                 : std::nullopt);
    }
    if (evaluate->parsed())
      return cmd_evaluate(eval_models, eval_samples, eval_seed);
    if (run->parsed()) {
      ExperimentConfig cfg = load_config(run_config);
      if (!run_transport.empty()) cfg.transport = run_transport;
      if (!run_out_dir.empty()) cfg.out_dir = run_out_dir;
      if (run_mc > 0) cfg.mc_samples = run_mc;
      if (run_seed_set) cfg.seed = run_seed;
      if (run_threshold_set) cfg.loss_threshold = run_threshold;
      return cmd_run(cfg);
    }
    if (swp->parsed())
      return cmd_sweep(load_config(sw_config), sw_knob, sw_values);
    if (rep->parsed()) return cmd_report(rep_dir, rep_hash);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return (run->parsed() || swp->parsed()) ? 3 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
