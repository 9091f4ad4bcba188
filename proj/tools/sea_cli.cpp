// sea: run experiments, run the oracle verification suites, emit synthetic datasets.
//
// Exit codes: 0 ok, 1 config error, 2 runtime error, 3 verification failure.
// Relative output directories resolve against $SEA_OUTPUT_ROOT when it is set.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sea/data_io.hpp"
#include "sea/environments.hpp"
#include "sea/experiment.hpp"
#include "sea/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerify = 3;

std::optional<std::string> output_root() {
  if (const char* root = std::getenv("SEA_OUTPUT_ROOT")) return std::string(root);
  return std::nullopt;
}

// Flag values land here; only flags that were actually given (on the command
// line or in the config file) override the base config.
struct RunFlags {
  std::string config;
  std::string manifest;
  sea::ExperimentConfig cfg;
  double learn_rate = 0.0;
};

void add_run_options(CLI::App& run, RunFlags& f) {
  auto& c = f.cfg;
  run.add_option("--config", f.config, "Flat INI/TOML-style file of `key = value` lines; keys are the long flag names");
  run.add_option("--manifest", f.manifest, "Rerun from a manifest JSON written by a previous run");
  run.add_option("--task", c.task, "classification | ranking");
  run.add_option("--dataset", c.dataset, "synthetic | file");
  run.add_option("--train", c.train_path, "Training data (svmlight; LTR format for ranking)");
  run.add_option("--test", c.test_path, "Held-out data; default splits --train");
  run.add_option("--test-fraction", c.test_fraction, "Held-out share when splitting");
  run.add_flag("--minmax-scale", c.minmax_scale, "Scale features to [0, 1] using training-pool ranges");
  run.add_option("--profile", c.profile, "Reward profile (perfect | near-random) or click profile");
  run.add_option("--method", c.method, "sea | bsea | ips | lambda-ips | eps-greedy | boltzmann | linucb | thompson | "
                                       "ranksvm-online | dbgd | baseline-only");
  run.add_option("--horizon", c.horizon, "Rounds per replication");
  run.add_option("--checkpoints", c.checkpoints, "Checkpoint rounds (default: powers of ten and the horizon)")
      ->delimiter(',');
  run.add_option("--seeds", c.seeds, "Replication seeds")->delimiter(',');
  run.add_option("--data-seed", c.data_seed, "Seed for synthetic data and splits");
  run.add_option("--delta", c.delta, "Confidence parameter");
  run.add_option("--epsilon", c.epsilon, "Exploration floor of baselines and deployed policies");
  run.add_option("--bias-severity", c.bias_severity, "Position-bias exponent eta");
  run.add_option("--baseline-fraction", c.baseline_fraction, "Share of training data used for the baseline");
  run.add_option("--learn-rate", f.learn_rate, "Learner step size");
  run.add_option("--lambda", c.lambda_shift, "Reward translation for lambda-ips");
  run.add_option("--dbgd-delta", c.dbgd_delta, "DBGD exploration step");
  run.add_option("--dbgd-gamma", c.dbgd_gamma, "DBGD update step");
  run.add_option("--linucb-alpha", c.linucb_alpha, "LinUCB exploration weight");
  run.add_option("--threads", c.threads, "Worker threads across seeds (0: all cores)");
  run.add_option("--output-dir", c.output_dir, "Artifact directory");
}

/// Copies every option that was set on `app` into `cfg`.
void apply_flags(const CLI::App& app, const RunFlags& f, sea::ExperimentConfig& cfg) {
  auto set = [&](const char* flag) { return app.get_option(flag)->count() > 0; };
  const auto& c = f.cfg;
  if (set("--task")) cfg.task = c.task;
  if (set("--dataset")) cfg.dataset = c.dataset;
  if (set("--train")) {
    cfg.train_path = c.train_path;
    if (!set("--dataset")) cfg.dataset = "file";
  }
  if (set("--test")) cfg.test_path = c.test_path;
  if (set("--test-fraction")) cfg.test_fraction = c.test_fraction;
  if (set("--minmax-scale")) cfg.minmax_scale = c.minmax_scale;
  if (set("--profile")) cfg.profile = c.profile;
  if (set("--method")) cfg.method = c.method;
  if (set("--horizon")) cfg.horizon = c.horizon;
  if (set("--checkpoints")) cfg.checkpoints = c.checkpoints;
  if (set("--seeds")) cfg.seeds = c.seeds;
  if (set("--data-seed")) cfg.data_seed = c.data_seed;
  if (set("--delta")) cfg.delta = c.delta;
  if (set("--epsilon")) cfg.epsilon = c.epsilon;
  if (set("--bias-severity")) cfg.bias_severity = c.bias_severity;
  if (set("--baseline-fraction")) cfg.baseline_fraction = c.baseline_fraction;
  if (set("--learn-rate")) cfg.learn_rate = f.learn_rate;
  if (set("--lambda")) cfg.lambda_shift = c.lambda_shift;
  if (set("--dbgd-delta")) cfg.dbgd_delta = c.dbgd_delta;
  if (set("--dbgd-gamma")) cfg.dbgd_gamma = c.dbgd_gamma;
  if (set("--linucb-alpha")) cfg.linucb_alpha = c.linucb_alpha;
  if (set("--threads")) cfg.threads = c.threads;
  if (set("--output-dir")) cfg.output_dir = c.output_dir;
}

/// Reads a flat config file through the same option table as the command line.
void apply_config_file(const std::string& path, sea::ExperimentConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw sea::ValidationError("cannot open config '" + path + "'");
  std::vector<std::string> args;
  for (const auto& item : CLI::ConfigINI().from_config(in)) {
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents.front() == "run")) {
      throw sea::ValidationError("config '" + path + "': unexpected section for key '" + item.name + "'");
    }
    args.push_back("--" + item.name);
    args.insert(args.end(), item.inputs.begin(), item.inputs.end());
  }
  RunFlags file_flags;
  CLI::App file_app;
  add_run_options(file_app, file_flags);
  try {
    std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed argument vector
    file_app.parse(args);
  } catch (const CLI::ParseError& e) {
    throw sea::ValidationError("config '" + path + "': " + e.what());
  }
  if (!file_flags.config.empty() || !file_flags.manifest.empty()) {
    throw sea::ValidationError("config '" + path + "' may not name another config or manifest");
  }
  apply_flags(file_app, file_flags, cfg);
}

/// Defaults, then the manifest, then the config file, then command-line flags.
sea::ExperimentConfig resolve_config(const CLI::App& run, const RunFlags& f) {
  sea::ExperimentConfig cfg;
  if (!f.manifest.empty()) {
    std::ifstream in(f.manifest);
    if (!in) throw sea::ValidationError("cannot open manifest '" + f.manifest + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw sea::ValidationError(std::string("manifest is not valid JSON: ") + e.what());
    }
    cfg = sea::config_from_json(j.contains("config") ? j.at("config") : j);
  }
  if (!f.config.empty()) apply_config_file(f.config, cfg);
  apply_flags(run, f, cfg);
  cfg.validate();
  return cfg;
}

int run_command(const CLI::App& run, const RunFlags& flags) {
  sea::ExperimentConfig cfg;
  try {
    cfg = resolve_config(run, flags);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const auto dir = sea::resolve_output_dir(cfg.output_dir, output_root());
    const auto res = sea::run_experiment(cfg, dir);
    std::cout << "wrote " << res.replications.size() << " replication(s) of " << cfg.method << " to " << dir.string()
              << '\n';
  } catch (const sea::ValidationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int verify_command(const std::vector<std::string>& requested, bool quick, const std::string& report_path) {
  const auto suites = requested.empty() ? sea::verify::suite_names() : requested;
  const auto opt = quick ? sea::verify::Options::quick() : sea::verify::Options{};
  nlohmann::json report{{"suites", nlohmann::json::array()}};
  bool ok = true;
  try {
    for (const auto& name : suites) {
      const auto r = sea::verify::run_suite(name, opt);
      ok = ok && r.passed();
      report["suites"].push_back(sea::verify::to_json(r));
      std::cerr << (r.passed() ? "PASS " : "FAIL ") << name << " (" << r.seconds << " s)\n";
    }
  } catch (const sea::ValidationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  report["passed"] = ok;
  if (report_path.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    std::ofstream out(report_path);
    if (!out) {
      std::cerr << "runtime error: cannot write '" << report_path << "'\n";
      return kExitRuntime;
    }
    out << report.dump(2) << '\n';
  }
  return ok ? kExitOk : kExitVerify;
}

int make_synthetic_command(const std::string& dir_arg, std::uint64_t seed) {
  try {
    const auto dir = sea::resolve_output_dir(dir_arg, output_root());
    std::filesystem::create_directories(dir);
    const auto [train, test] = sea::make_synthetic_classification(sea::SyntheticClassificationSpec{}, seed);
    const auto ranking = sea::make_synthetic_ranking(sea::SyntheticRankingSpec{}, seed);
    auto write = [&](const std::string& name, const auto& writer) {
      std::ofstream out(dir / name);
      if (!out) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
      writer(out);
      std::cout << (dir / name).string() << '\n';
    };
    write("classification_train.svm", [&](std::ostream& o) { sea::write_svmlight(o, train); });
    write("classification_test.svm", [&](std::ostream& o) { sea::write_svmlight(o, test); });
    write("ranking.svm", [&](std::ostream& o) { sea::write_ltr_svmlight(o, ranking); });
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe exploration for contextual bandits: experiments and verification"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run one method over seeds and write traces, metrics and a manifest");
  add_run_options(*run, run_flags);

  std::vector<std::string> suites;
  bool quick = false;
  std::string report_path;
  auto* verify = app.add_subcommand("verify", "Run oracle cross-check suites and print a JSON report");
  verify->add_option("suites", suites, "Suites to run (default: all)");
  verify->add_flag("--quick", quick, "Smaller randomized checks");
  verify->add_option("--report", report_path, "Write the report here instead of stdout");

  std::string synth_dir = "synthetic";
  std::uint64_t synth_seed = sea::ExperimentConfig{}.data_seed;
  auto* synth = app.add_subcommand("make-synthetic", "Write the built-in synthetic datasets as svmlight files");
  synth->add_option("--output-dir", synth_dir, "Destination directory");
  synth->add_option("--data-seed", synth_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (run->parsed()) return run_command(*run, run_flags);
  if (verify->parsed()) return verify_command(suites, quick, report_path);
  return make_synthetic_command(synth_dir, synth_seed);
}
