#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "sea/experiment.hpp"

namespace sea {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("sea_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SEA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_files(const fs::path& dir, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().filename().string().starts_with(prefix) ? 1 : 0;
  return n;
}

ExperimentConfig small_config(const std::string& method, std::size_t horizon = 300) {
  ExperimentConfig cfg;
  cfg.method = method;
  cfg.horizon = horizon;
  cfg.seeds = {0, 1};
  cfg.checkpoints = {horizon / 3, horizon};
  return cfg;
}

double metric(const Replication& rep, const std::string& name, std::size_t checkpoint) {
  for (const auto& m : rep.metrics) {
    if (m.metric == name && m.checkpoint == checkpoint) return m.value;
  }
  ADD_FAILURE() << "missing metric " << name << " at " << checkpoint;
  return std::nan("");
}

TEST(Config, JsonRoundTrip) {
  auto cfg = small_config("lambda-ips");
  cfg.learn_rate = 0.2;
  cfg.lambda_shift = 0.3;
  cfg.seeds = {4, 9};
  const auto back = config_from_json(nlohmann::json::parse(to_json(cfg).dump()));
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_EQ(back.learner().learn_rate, 0.2);
}

TEST(Config, RejectsUnknownKeysAndNames) {
  auto j = to_json(ExperimentConfig{});
  j["horizn"] = 5;
  EXPECT_THROW(config_from_json(j), ValidationError);
  auto cfg = small_config("nope");
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = small_config("dbgd");  // ranking-only method
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.task = "ranking";
  EXPECT_NO_THROW(cfg.validate());
  cfg.profile = "sloppy";
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Config, DefaultLearnRatesPerTask) {
  ExperimentConfig cfg;
  EXPECT_EQ(cfg.learner().learn_rate, 0.01);
  cfg.task = "ranking";
  EXPECT_EQ(cfg.learner().learn_rate, 0.001);
  EXPECT_EQ(cfg.resolved_checkpoints(), (std::vector<std::size_t>{100, 1000, 10000}));
}

TEST(Format, Numbers) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(std::nan("")), "");
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
}

TEST(Seeds, StreamsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto st = derive_streams(s);
    seen.insert({st.baseline, st.environment, st.policy});
  }
  EXPECT_EQ(seen.size(), 300u);
  EXPECT_EQ(derive_streams(5).policy, derive_streams(5).policy);
}

TEST(Runner, EveryClassificationMethodRuns) {
  for (const auto& method : classification_methods()) {
    const auto res = run_replications(small_config(method, 200));
    ASSERT_EQ(res.replications.size(), 2u) << method;
    for (const auto& rep : res.replications) {
      ASSERT_EQ(rep.rows.size(), 200u) << method;
      const double held = metric(rep, "heldout_reward", 200);
      EXPECT_GE(held, 0.0) << method;
      EXPECT_LE(held, 1.0) << method;
      EXPECT_EQ(metric(rep, "cumulative_reward", 200), rep.rows.back().cumulative_reward) << method;
      EXPECT_NEAR(metric(rep, "regret", 200), 200.0 - rep.rows.back().cumulative_reward, 1e-9) << method;
    }
  }
}

TEST(Runner, EveryRankingMethodRuns) {
  for (const auto& method : ranking_methods()) {
    auto cfg = small_config(method, 150);
    cfg.task = "ranking";
    cfg.seeds = {3};
    const auto res = run_replications(cfg);
    const auto& rep = res.replications.front();
    ASSERT_EQ(rep.rows.size(), 150u) << method;
    const double ndcg = metric(rep, "ndcg", 150);
    EXPECT_GT(ndcg, 0.0) << method;
    EXPECT_LE(ndcg, 1.0) << method;
  }
}

TEST(Runner, ResultsDoNotDependOnThreads) {
  auto cfg = small_config("sea", 400);
  cfg.seeds = {0, 1, 2};
  cfg.threads = 1;
  const auto a = run_replications(cfg);
  cfg.threads = 3;
  const auto b = run_replications(cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    std::ostringstream sa;
    std::ostringstream sb;
    write_trace_csv(sa, a.replications[i].rows);
    write_trace_csv(sb, b.replications[i].rows);
    EXPECT_EQ(sa.str(), sb.str());
  }
}

TEST(Runner, SeaMatchesBaselineBeforeFirstDeployment) {
  auto cfg = small_config("sea", 3000);
  cfg.learn_rate = 0.5;
  cfg.checkpoints = {10, 100, 1000, 2000, 3000};
  const auto sea_res = run_replications(cfg);
  cfg.method = "baseline-only";
  const auto base_res = run_replications(cfg);
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const auto& s = sea_res.replications[i];
    const auto& b = base_res.replications[i];
    const std::size_t first = s.deployments.empty() ? cfg.horizon + 1 : s.deployments.front();
    for (std::size_t t = 1; t < first && t <= cfg.horizon; ++t) {
      ASSERT_EQ(s.rows[t - 1].action, b.rows[t - 1].action);
      ASSERT_EQ(s.rows[t - 1].reward, b.rows[t - 1].reward);
    }
    for (auto cp : cfg.checkpoints) {
      if (cp < first) EXPECT_EQ(metric(s, "cumulative_reward", cp) - metric(b, "cumulative_reward", cp), 0.0);
    }
  }
}

TEST(Runner, ThompsonPropensityIsBlankInTrace) {
  auto cfg = small_config("thompson", 20);
  cfg.seeds = {0};
  const auto res = run_replications(cfg);
  std::ostringstream out;
  write_trace_csv(out, res.replications.front().rows);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::vector<std::string> cols;
  std::stringstream ls(line);
  for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
  EXPECT_EQ(cols.at(3), "");
}

TEST(Artifacts, AggregateSummarizesSeeds) {
  auto cfg = small_config("baseline-only", 100);
  cfg.checkpoints = {100};
  cfg.seeds = {0, 1, 2};
  const auto res = run_replications(cfg);
  std::vector<double> values;
  for (const auto& rep : res.replications) values.push_back(metric(rep, "cumulative_reward", 100));
  std::ostringstream out;
  write_aggregate_csv(out, res);
  const double mean = (values[0] + values[1] + values[2]) / 3.0;
  EXPECT_NE(out.str().find("baseline-only,100,cumulative_reward," + format_number(mean) + ","), std::string::npos);
  EXPECT_NE(out.str().find(",3\n"), std::string::npos);
}

TEST(Cli, BaselineFileCountContract) {
  const TempDir tmp;
  const auto dir = tmp.path() / "out";
  ASSERT_EQ(run_cli("run --method baseline-only --horizon 1000 --seeds 0,1,2 --output-dir " + dir.string()), 0);
  EXPECT_EQ(count_files(dir, "trace_baseline-only_seed"), 3u);
  EXPECT_EQ(count_files(dir, "aggregate_"), 1u);
  EXPECT_EQ(count_files(dir, "metrics_"), 1u);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest_baseline-only.json"));
  EXPECT_EQ(manifest["config"]["horizon"], 1000);
  EXPECT_EQ(manifest["rng_streams"].size(), 3u);
  EXPECT_EQ(manifest["label_names"].size(), 10u);
  EXPECT_GE(manifest["files"].size(), 5u);
}

TEST(Cli, UnknownMethodWritesNothing) {
  const TempDir tmp;
  const auto dir = tmp.path() / "never";
  EXPECT_EQ(run_cli("run --method magic --output-dir " + dir.string()), 1);
  EXPECT_FALSE(fs::exists(dir));
  EXPECT_EQ(run_cli("run --horizon notanumber --output-dir " + dir.string()), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Cli, MissingInputIsRuntimeError) {
  const TempDir tmp;
  EXPECT_EQ(run_cli("run --train " + (tmp.path() / "absent.svm").string() + " --output-dir " +
                    (tmp.path() / "o").string()),
            2);
}

TEST(Cli, FlagsOverrideConfigFile) {
  const TempDir tmp;
  const auto cfg_path = tmp.path() / "run.ini";
  std::ofstream(cfg_path) << "method = baseline-only\nhorizon = 300\nseeds = 4,5\n";
  const auto dir = tmp.path() / "out";
  ASSERT_EQ(run_cli("run --config " + cfg_path.string() + " --horizon 200 --output-dir " + dir.string()), 0);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest_baseline-only.json"));
  EXPECT_EQ(manifest["config"]["horizon"], 200);
  EXPECT_EQ(manifest["config"]["seeds"], (std::vector<int>{4, 5}));
  EXPECT_EQ(count_files(dir, "trace_"), 2u);
}

TEST(Cli, BadConfigFileIsConfigError) {
  const TempDir tmp;
  const auto cfg_path = tmp.path() / "bad.ini";
  std::ofstream(cfg_path) << "horizn = 5\n";
  EXPECT_EQ(run_cli("run --config " + cfg_path.string() + " --output-dir " + (tmp.path() / "o").string()), 1);
}

TEST(Cli, ManifestRerunIsIdentical) {
  const TempDir tmp;
  const auto first = tmp.path() / "a";
  const auto second = tmp.path() / "b";
  ASSERT_EQ(run_cli("run --method sea --horizon 500 --seeds 1,2 --output-dir " + first.string()), 0);
  ASSERT_EQ(run_cli("run --manifest " + (first / "manifest_sea.json").string() + " --output-dir " + second.string()), 0);
  EXPECT_EQ(slurp(first / "aggregate_sea.csv"), slurp(second / "aggregate_sea.csv"));
  EXPECT_EQ(slurp(first / "trace_sea_seed2.csv"), slurp(second / "trace_sea_seed2.csv"));
}

TEST(Cli, FileDatasetsFromMakeSynthetic) {
  const TempDir tmp;
  const auto data = tmp.path() / "data";
  ASSERT_EQ(run_cli("make-synthetic --output-dir " + data.string()), 0);
  const auto out = tmp.path() / "out";
  ASSERT_EQ(run_cli("run --method ips --horizon 200 --seeds 0 --train " + (data / "classification_train.svm").string() +
                    " --test " + (data / "classification_test.svm").string() + " --output-dir " + out.string()),
            0);
  EXPECT_EQ(count_files(out, "trace_ips_seed0"), 1u);
  ASSERT_EQ(run_cli("run --task ranking --method dbgd --horizon 100 --seeds 0 --minmax-scale --train " +
                    (data / "ranking.svm").string() + " --output-dir " + out.string()),
            0);
  EXPECT_EQ(count_files(out, "trace_dbgd_seed0"), 1u);
}

TEST(Cli, OutputRootEnvironment) {
  const TempDir tmp;
  const std::string cmd = "SEA_OUTPUT_ROOT=" + tmp.path().string() + " " + std::string(SEA_CLI_PATH) +
                          " make-synthetic --output-dir rel >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(tmp.path() / "rel" / "ranking.svm"));
}

TEST(Cli, VerifyExitCodes) {
  EXPECT_EQ(run_cli("verify bounds ndcg"), 0);
  EXPECT_EQ(run_cli("verify no-such-suite"), 1);
}

}  // namespace
}  // namespace sea
