#pragma once
// Experiment runner: one config drives (task x method x seeds x horizon) and
// produces per-seed trace CSVs, tidy checkpoint metrics, an aggregate table and
// a manifest that is itself a valid config for rerunning.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "sea/core_types.hpp"
#include "sea/data_io.hpp"
#include "sea/environments.hpp"
#include "sea/estimators.hpp"
#include "sea/evaluation.hpp"
#include "sea/learners.hpp"
#include "sea/policies.hpp"
#include "sea/safe_deploy.hpp"

#ifndef SEA_GIT_DESCRIBE
#define SEA_GIT_DESCRIBE "unknown"
#endif

namespace sea {

inline const std::vector<std::string>& classification_methods() {
  static const std::vector<std::string> names{"sea",        "bsea",      "ips",    "lambda-ips", "eps-greedy",
                                              "boltzmann",  "linucb",    "thompson", "baseline-only"};
  return names;
}

inline const std::vector<std::string>& ranking_methods() {
  static const std::vector<std::string> names{"sea", "bsea", "ips", "lambda-ips", "ranksvm-online", "dbgd",
                                              "baseline-only"};
  return names;
}

struct ExperimentConfig {
  std::string task = "classification";  // classification | ranking
  std::string dataset = "synthetic";    // synthetic | file
  std::string train_path;
  std::string test_path;  // optional; otherwise train is split
  double test_fraction = 0.25;
  bool minmax_scale = false;  // per-feature [0, 1] scaling fitted on the training pool
  std::string profile = "perfect";  // reward profile (classification) or click profile (ranking)
  std::string method = "sea";
  std::size_t horizon = 10000;
  std::vector<std::size_t> checkpoints;  // empty: powers of ten plus the horizon
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::uint64_t data_seed = 7;
  double delta = 0.05;
  double epsilon = 0.1;
  double bias_severity = 1.0;
  double baseline_fraction = 0.01;
  std::optional<double> learn_rate;  // default 0.01 (classification), 0.001 (ranking)
  double lambda_shift = 0.0;
  double dbgd_delta = 1.0;
  double dbgd_gamma = 0.01;
  double linucb_alpha = 1.0;
  std::size_t threads = 0;  // 0: one per hardware thread
  std::string output_dir = "results";

  [[nodiscard]] bool is_ranking() const { return task == "ranking"; }

  [[nodiscard]] LearnerConfig learner() const {
    LearnerConfig l;
    l.learn_rate = learn_rate.value_or(is_ranking() ? 0.001 : 0.01);
    l.lambda_shift = lambda_shift;
    l.dbgd_delta = dbgd_delta;
    l.dbgd_gamma = dbgd_gamma;
    return l;
  }

  [[nodiscard]] std::vector<std::size_t> resolved_checkpoints() const {
    if (checkpoints.empty()) return default_checkpoints(horizon);
    return checkpoints;
  }

  /// Rejects unknown names and out-of-range values before anything runs.
  void validate() const {
    if (task != "classification" && task != "ranking") {
      throw ValidationError("unknown task '" + task + "' (expected classification | ranking)");
    }
    const auto& methods = is_ranking() ? ranking_methods() : classification_methods();
    if (std::find(methods.begin(), methods.end(), method) == methods.end()) {
      std::string list;
      for (const auto& m : methods) list += (list.empty() ? "" : " | ") + m;
      throw ValidationError("unknown method '" + method + "' for task " + task + " (expected " + list + ")");
    }
    if (is_ranking()) {
      (void)click_profile_by_name(profile);
    } else {
      (void)reward_profile_by_name(profile);
    }
    if (dataset != "synthetic" && dataset != "file") throw ValidationError("dataset must be synthetic | file");
    if (dataset == "file" && train_path.empty()) throw ValidationError("dataset=file needs train_path");
    if (horizon < 1) throw ValidationError("horizon must be >= 1");
    if (seeds.empty()) throw ValidationError("at least one seed is required");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      if (checkpoints[i] < 1 || checkpoints[i] > horizon) throw ValidationError("checkpoints must lie in [1, horizon]");
      if (i > 0 && checkpoints[i] <= checkpoints[i - 1]) throw ValidationError("checkpoints must be strictly increasing");
    }
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must lie in (0, 1]");
    if (!(bias_severity >= 0.0)) throw ValidationError("bias_severity must be non-negative");
    if (!(baseline_fraction > 0.0 && baseline_fraction <= 1.0)) throw ValidationError("baseline_fraction must lie in (0, 1]");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test_fraction must lie in (0, 1)");
    if (!(linucb_alpha >= 0.0)) throw ValidationError("linucb_alpha must be non-negative");
    learner().validate();
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["task"] = c.task;
  j["dataset"] = c.dataset;
  j["train_path"] = c.train_path;
  j["test_path"] = c.test_path;
  j["test_fraction"] = c.test_fraction;
  j["minmax_scale"] = c.minmax_scale;
  j["profile"] = c.profile;
  j["method"] = c.method;
  j["horizon"] = c.horizon;
  j["checkpoints"] = c.checkpoints;
  j["seeds"] = c.seeds;
  j["data_seed"] = c.data_seed;
  j["delta"] = c.delta;
  j["epsilon"] = c.epsilon;
  j["bias_severity"] = c.bias_severity;
  j["baseline_fraction"] = c.baseline_fraction;
  j["learn_rate"] = c.learn_rate ? nlohmann::json(*c.learn_rate) : nlohmann::json(nullptr);
  j["lambda_shift"] = c.lambda_shift;
  j["dbgd_delta"] = c.dbgd_delta;
  j["dbgd_gamma"] = c.dbgd_gamma;
  j["linucb_alpha"] = c.linucb_alpha;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  const auto known = to_json(c);
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ValidationError("unknown config key '" + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  try {
    get("task", c.task);
    get("dataset", c.dataset);
    get("train_path", c.train_path);
    get("test_path", c.test_path);
    get("test_fraction", c.test_fraction);
    get("minmax_scale", c.minmax_scale);
    get("profile", c.profile);
    get("method", c.method);
    get("horizon", c.horizon);
    get("checkpoints", c.checkpoints);
    get("seeds", c.seeds);
    get("data_seed", c.data_seed);
    get("delta", c.delta);
    get("epsilon", c.epsilon);
    get("bias_severity", c.bias_severity);
    get("baseline_fraction", c.baseline_fraction);
    if (j.contains("learn_rate") && !j.at("learn_rate").is_null()) c.learn_rate = j.at("learn_rate").get<double>();
    get("lambda_shift", c.lambda_shift);
    get("dbgd_delta", c.dbgd_delta);
    get("dbgd_gamma", c.dbgd_gamma);
    get("linucb_alpha", c.linucb_alpha);
    get("threads", c.threads);
    get("output_dir", c.output_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Formatting

/// 12 significant digits, '.' decimal regardless of locale; NaN prints as an empty field.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Seeds

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31U);
}

/// Independent streams per replication: baseline training, environment, and the
/// acting policy's own randomness. Methods sharing a seed share all three.
struct SeedStreams {
  std::uint64_t baseline = 0;
  std::uint64_t environment = 0;
  std::uint64_t policy = 0;
};

inline SeedStreams derive_streams(std::uint64_t seed) {
  return {splitmix64(seed * 3 + 0), splitmix64(seed * 3 + 1), splitmix64(seed * 3 + 2)};
}

// ---------------------------------------------------------------------------
// Data

struct ClassificationTask {
  std::shared_ptr<const ClassificationData> pool;
  ClassificationData test;
  std::vector<std::string> label_names;  // original label of each action id
};

struct RankingTask {
  std::shared_ptr<const RankingData> pool;
  RankingData test;
};

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path + "'");
  return in;
}

inline ClassificationTask load_classification(const ExperimentConfig& cfg) {
  ClassificationDataset train;
  ClassificationDataset test;
  if (cfg.dataset == "synthetic") {
    std::tie(train, test) = make_synthetic_classification(SyntheticClassificationSpec{}, cfg.data_seed);
  } else {
    auto in = open_input(cfg.train_path);
    auto all = parse_svmlight(in);
    if (cfg.test_path.empty()) {
      std::mt19937_64 rng(cfg.data_seed);
      std::tie(train, test) = train_test_split(all, cfg.test_fraction, rng);
    } else {
      auto tin = open_input(cfg.test_path);
      train = std::move(all);
      test = parse_svmlight(tin, train.n_features);
      if (test.label_names != train.label_names) throw ValidationError("train and test label sets differ");
    }
    test.n_features = train.n_features = std::max(train.n_features, test.n_features);
  }
  ClassificationTask task;
  auto pool = to_dense(train);
  auto held = to_dense(test);
  held.n_classes = pool.n_classes;
  if (cfg.minmax_scale) {
    minmax_scale(held.features, pool.features);
    minmax_scale(pool.features, Matrix(pool.features));
  }
  task.label_names = train.label_names;
  task.pool = std::make_shared<const ClassificationData>(std::move(pool));
  task.test = std::move(held);
  return task;
}

inline RankingTask load_ranking(const ExperimentConfig& cfg) {
  LtrDataset all;
  LtrDataset test;
  std::mt19937_64 rng(cfg.data_seed);
  if (cfg.dataset == "synthetic") {
    all = make_synthetic_ranking(SyntheticRankingSpec{}, cfg.data_seed);
  } else {
    auto in = open_input(cfg.train_path);
    all = parse_ltr_svmlight(in);
  }
  LtrDataset train;
  if (cfg.dataset == "file" && !cfg.test_path.empty()) {
    auto tin = open_input(cfg.test_path);
    train = std::move(all);
    test = parse_ltr_svmlight(tin, train.n_features);
    test.n_features = train.n_features = std::max(train.n_features, test.n_features);
  } else {
    std::tie(train, test) = train_test_split(all, cfg.test_fraction, rng);
  }
  return {std::make_shared<const RankingData>(to_dense(train)), to_dense(test)};
}

// ---------------------------------------------------------------------------
// Results

struct MetricPoint {
  std::size_t checkpoint = 0;
  std::string metric;
  double value = 0.0;
};

struct Replication {
  std::uint64_t seed = 0;
  std::vector<TraceRow> rows;
  std::vector<MetricPoint> metrics;
  std::vector<std::size_t> deployments;  // rounds at which a new policy was deployed
};

namespace detail {

/// Greedy scorer over per-action linear weights (rows of `w`).
struct LinearScorer {
  Matrix w;
  [[nodiscard]] ActionId greedy_action(const Vector& x) const { return ActionId(argmax_lowest(w * x)); }
};

// Classification agents: act on a context, learn from the outcome, expose the
// learned model (and the acting model, when different) for held-out scoring.
class ClassificationAgent {
 public:
  virtual ~ClassificationAgent() = default;
  virtual SampledAction act(const ContextVector& x, std::mt19937_64& rng) = 0;
  virtual void learn(std::size_t t, const LoggedInteraction& item, TraceRow& row) = 0;
  [[nodiscard]] virtual Matrix learned_weights() const = 0;
  [[nodiscard]] virtual std::optional<Matrix> deployed_weights() const { return std::nullopt; }
  [[nodiscard]] virtual std::vector<std::size_t> deployments() const { return {}; }
};

class BaselineAgent : public ClassificationAgent {
 public:
  explicit BaselineAgent(EpsilonGreedyPolicy b) : acting_(std::move(b)) {}
  SampledAction act(const ContextVector& x, std::mt19937_64& rng) override { return sample_action(acting_, x, rng); }
  void learn(std::size_t, const LoggedInteraction&, TraceRow&) override {}
  [[nodiscard]] Matrix learned_weights() const override { return acting_.weights; }

 private:
  EpsilonGreedyPolicy acting_;
};

/// Baseline acts; a softmax policy learns offline from its log (IPS or lambda-IPS).
class CounterfactualAgent : public ClassificationAgent {
 public:
  CounterfactualAgent(EpsilonGreedyPolicy b, LearnerConfig cfg)
      : learned_(b.weights), acting_(std::move(b)), cfg_(cfg) {}
  SampledAction act(const ContextVector& x, std::mt19937_64& rng) override { return sample_action(acting_, x, rng); }
  void learn(std::size_t, const LoggedInteraction& item, TraceRow&) override { lambda_ips_step(learned_, item, cfg_); }
  [[nodiscard]] Matrix learned_weights() const override { return learned_.weights; }

 private:
  SoftmaxLinearPolicy learned_;
  EpsilonGreedyPolicy acting_;
  LearnerConfig cfg_;
};

class SeaAgent : public ClassificationAgent {
 public:
  SeaAgent(EpsilonGreedyPolicy b, SeaConfig cfg) : state_(std::move(b), cfg) {}
  SampledAction act(const ContextVector& x, std::mt19937_64& rng) override {
    return sample_action(state_.deployed(), x, rng);
  }
  void learn(std::size_t t, const LoggedInteraction& item, TraceRow& row) override {
    state_.observe(item);
    const auto ev_w = state_.evaluate_candidate();
    const auto ev_d = state_.evaluate_deployed();
    row.mean_w = ev_w.mean;
    row.lcb_w = ev_w.lcb;
    row.mean_d = ev_d.mean;
    row.ucb_d = ev_d.ucb;
    if (deployment_check(ev_w, ev_d)) {
      state_.deploy(t, ev_w, ev_d);
      row.deployed = true;
    }
  }
  [[nodiscard]] Matrix learned_weights() const override { return state_.learned().weights; }
  [[nodiscard]] std::optional<Matrix> deployed_weights() const override {
    if (const auto* snap = state_.deployed().snapshot()) return snap->base.weights;
    return state_.baseline().weights;
  }
  [[nodiscard]] std::vector<std::size_t> deployments() const override {
    std::vector<std::size_t> out;
    for (const auto& d : state_.deployments()) out.push_back(d.t);
    return out;
  }

 private:
  SeaState state_;
};

/// Online softmax learner trained by policy gradient; acts either by sampling
/// the softmax (Boltzmann) or epsilon-greedily on its scores.
class PolicyGradientAgent : public ClassificationAgent {
 public:
  PolicyGradientAgent(const Matrix& w, LearnerConfig cfg, std::optional<double> epsilon)
      : policy_(w), cfg_(cfg), epsilon_(epsilon) {}
  SampledAction act(const ContextVector& x, std::mt19937_64& rng) override {
    if (epsilon_) return sample_action(EpsilonGreedyPolicy(policy_.weights, *epsilon_), x, rng);
    return sample_action(policy_, x, rng);
  }
  void learn(std::size_t, const LoggedInteraction& item, TraceRow&) override {
    policy_gradient_step(policy_, item.context.values, item.action, item.reward, cfg_);
  }
  [[nodiscard]] Matrix learned_weights() const override { return policy_.weights; }

 private:
  SoftmaxLinearPolicy policy_;
  LearnerConfig cfg_;
  std::optional<double> epsilon_;
};

class LinUcbAgent : public ClassificationAgent {
 public:
  LinUcbAgent(std::size_t n, std::size_t m, double alpha) : state_(n, m, alpha) {}
  SampledAction act(const ContextVector& x, std::mt19937_64&) override { return {linucb_select(state_, x), 1.0}; }
  void learn(std::size_t, const LoggedInteraction& item, TraceRow&) override {
    state_.update(item.context.values, item.action, item.reward);
  }
  [[nodiscard]] Matrix learned_weights() const override {
    Matrix w(static_cast<Eigen::Index>(state_.n_actions()), static_cast<Eigen::Index>(state_.dim()));
    for (std::size_t a = 0; a < state_.n_actions(); ++a) w.row(static_cast<Eigen::Index>(a)) = state_.theta(ActionId(a)).transpose();
    return w;
  }

 private:
  LinUcbState state_;
};

class ThompsonAgent : public ClassificationAgent {
 public:
  ThompsonAgent(std::size_t n, std::size_t m) : state_(n, m) {}
  // the propensity of a sampled-posterior argmax has no closed form; it is not recorded
  SampledAction act(const ContextVector& x, std::mt19937_64& rng) override {
    return {thompson_select(state_, x, rng), std::numeric_limits<double>::quiet_NaN()};
  }
  void learn(std::size_t, const LoggedInteraction& item, TraceRow&) override {
    state_.update(item.context.values, item.action, item.reward);
  }
  [[nodiscard]] Matrix learned_weights() const override {
    Matrix w(static_cast<Eigen::Index>(state_.n_actions()), state_.mean(ActionId(0)).size());
    for (std::size_t a = 0; a < state_.n_actions(); ++a) w.row(static_cast<Eigen::Index>(a)) = state_.mean(ActionId(a)).transpose();
    return w;
  }

 private:
  ThompsonState state_;
};

inline std::unique_ptr<ClassificationAgent> make_classification_agent(const ExperimentConfig& cfg,
                                                                       const EpsilonGreedyPolicy& baseline) {
  const auto learner = cfg.learner();
  const auto n = baseline.n_actions();
  const auto m = baseline.dim();
  if (cfg.method == "sea" || cfg.method == "bsea") {
    SeaConfig sc;
    sc.mode = cfg.method == "sea" ? DeployMode::Sea : DeployMode::Bsea;
    sc.delta = cfg.delta;
    sc.deploy_epsilon = cfg.epsilon;
    sc.learner = learner;
    sc.keep_log = false;
    return std::make_unique<SeaAgent>(baseline, sc);
  }
  if (cfg.method == "ips") {
    auto l = learner;
    l.lambda_shift = 0.0;
    return std::make_unique<CounterfactualAgent>(baseline, l);
  }
  if (cfg.method == "lambda-ips") return std::make_unique<CounterfactualAgent>(baseline, learner);
  if (cfg.method == "eps-greedy") return std::make_unique<PolicyGradientAgent>(baseline.weights, learner, cfg.epsilon);
  if (cfg.method == "boltzmann") return std::make_unique<PolicyGradientAgent>(baseline.weights, learner, std::nullopt);
  if (cfg.method == "linucb") return std::make_unique<LinUcbAgent>(n, m, cfg.linucb_alpha);
  if (cfg.method == "thompson") return std::make_unique<ThompsonAgent>(n, m);
  return std::make_unique<BaselineAgent>(baseline);
}

inline Replication run_classification_seed(const ExperimentConfig& cfg, const ClassificationTask& task,
                                           std::uint64_t seed) {
  const auto streams = derive_streams(seed);
  const auto profile = reward_profile_by_name(cfg.profile);
  SupervisedConfig sup;
  sup.epsilon = cfg.epsilon;
  std::mt19937_64 baseline_rng(streams.baseline);
  const auto baseline = make_baseline(*task.pool, cfg.baseline_fraction, sup, baseline_rng);
  auto agent = make_classification_agent(cfg, baseline);

  ClassificationEnv env(task.pool, profile, streams.environment);
  std::mt19937_64 policy_rng(streams.policy);
  const auto checkpoints = cfg.resolved_checkpoints();
  const double oracle = profile.expected(true);

  Replication rep;
  rep.seed = seed;
  rep.rows.reserve(cfg.horizon);
  double cumulative = 0.0;
  double regret_sum = 0.0;
  std::size_t next_cp = 0;
  std::size_t deployments = 0;
  for (std::size_t t = 1; t <= cfg.horizon; ++t) {
    auto draw = env.next();
    const auto [action, propensity] = agent->act(draw.context, policy_rng);
    const double r = env.reward(action, draw.truth);
    TraceRow row;
    row.t = t;
    row.action = action.id;
    row.reward = r;
    row.propensity = propensity;
    const LoggedInteraction item{std::move(draw.context), action, r, std::isnan(propensity) ? 1.0 : propensity};
    agent->learn(t, item, row);
    cumulative += r;
    regret_sum += oracle - r;
    deployments += row.deployed ? 1 : 0;
    row.cumulative_reward = cumulative;
    rep.rows.push_back(row);
    if (next_cp < checkpoints.size() && checkpoints[next_cp] == t) {
      rep.metrics.push_back({t, "cumulative_reward", cumulative});
      rep.metrics.push_back({t, "regret", regret_sum});
      rep.metrics.push_back({t, "heldout_reward", average_reward_holdout(LinearScorer{agent->learned_weights()}, task.test, profile)});
      if (auto dw = agent->deployed_weights()) {
        rep.metrics.push_back({t, "heldout_reward_deployed", average_reward_holdout(LinearScorer{*dw}, task.test, profile)});
        rep.metrics.push_back({t, "deployments", static_cast<double>(deployments)});
      }
      ++next_cp;
    }
  }
  rep.deployments = agent->deployments();
  return rep;
}

// Ranking agents: choose a list to display, learn from its clicks.
inline Replication run_ranking_seed(const ExperimentConfig& cfg, const RankingTask& task, std::uint64_t seed) {
  const auto streams = derive_streams(seed);
  const ExaminationModel model{cfg.bias_severity, kClickCutoff};
  SupervisedConfig sup;
  std::mt19937_64 baseline_rng(streams.baseline);
  const auto baseline = make_ranking_baseline(*task.pool, cfg.baseline_fraction, sup, baseline_rng);
  RankingEnv env(task.pool, model, click_profile_by_name(cfg.profile), streams.environment);
  std::mt19937_64 policy_rng(streams.policy);
  const auto learner = cfg.learner();
  const auto checkpoints = cfg.resolved_checkpoints();
  const bool is_sea = cfg.method == "sea" || cfg.method == "bsea";

  std::optional<RankingSeaState> sea;
  if (is_sea) {
    RankingSeaConfig rc;
    rc.mode = cfg.method == "sea" ? DeployMode::Sea : DeployMode::Bsea;
    rc.delta = cfg.delta;
    rc.learner = learner;
    sea.emplace(baseline, model, rc);
  }
  LinearRanker learned = baseline;
  auto lambda_cfg = learner;
  if (cfg.method == "ips") lambda_cfg.lambda_shift = 0.0;

  Replication rep;
  rep.seed = seed;
  rep.rows.reserve(cfg.horizon);
  double cumulative = 0.0;
  std::size_t next_cp = 0;
  std::size_t deployments = 0;
  for (std::size_t t = 1; t <= cfg.horizon; ++t) {
    const auto query = env.next_query();
    const auto& docs = task.pool->docs[query];
    TraceRow row;
    row.t = t;
    row.action = query;
    std::vector<ClickRecord> clicks;
    if (is_sea) {
      clicks = env.clicks(query, rank_candidates(sea->deployed(), docs));
      sea->observe(query, clicks, docs);
      const auto ev_w = sea->evaluate_learned(task.pool->docs);
      const auto ev_d = sea->evaluate_deployed();
      row.mean_w = ev_w.mean;
      row.lcb_w = ev_w.lcb;
      row.mean_d = ev_d.mean;
      row.ucb_d = ev_d.ucb;
      if (deployment_check(ev_w, ev_d)) {
        sea->deploy(t, ev_w, ev_d, task.pool->docs);
        row.deployed = true;
      }
      learned = sea->learned();
    } else if (cfg.method == "dbgd") {
      auto res = dbgd_step(learned, docs, [&](const RankedList& shown) { return env.clicks(query, shown); },
                           policy_rng, learner);
      clicks = std::move(res.clicks);
      learned = std::move(res.ranker);
    } else if (cfg.method == "ranksvm-online") {
      clicks = env.clicks(query, rank_candidates(learned, docs));
      learned = ranksvm_pairwise_update(std::move(learned), clicks, docs, learner);
    } else {
      clicks = env.clicks(query, rank_candidates(baseline, docs));
      if (cfg.method != "baseline-only") {
        const auto clicked = clicked_docs(clicks);
        ranking_ips_step(learned, docs, clicked, lambda_cfg);
      }
    }
    // reward is the click count; propensity is the smallest examination probability among the clicks
    double r = 0.0;
    double p = std::numeric_limits<double>::quiet_NaN();
    for (const auto& c : clicks) {
      if (!c.clicked) continue;
      r += 1.0;
      p = std::isnan(p) ? c.propensity : std::min(p, c.propensity);
    }
    row.reward = r;
    row.propensity = p;
    cumulative += r;
    deployments += row.deployed ? 1 : 0;
    row.cumulative_reward = cumulative;
    rep.rows.push_back(row);
    if (next_cp < checkpoints.size() && checkpoints[next_cp] == t) {
      rep.metrics.push_back({t, "cumulative_reward", cumulative});
      rep.metrics.push_back({t, "ndcg", mean_ndcg(learned, task.test)});
      if (is_sea) {
        rep.metrics.push_back({t, "ndcg_deployed", mean_ndcg(sea->deployed(), task.test)});
        rep.metrics.push_back({t, "deployments", static_cast<double>(deployments)});
      }
      ++next_cp;
    }
  }
  if (is_sea) {
    for (const auto& d : sea->deployments()) rep.deployments.push_back(d.t);
  }
  return rep;
}

}  // namespace detail

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<Replication> replications;  // in seed order
  std::vector<std::string> label_names;   // classification: original label of each action id
};

/// Runs every seed of the config; replications run in parallel, each fully
/// owning its state, so results do not depend on the thread count.
inline ExperimentResult run_replications(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult out{cfg, std::vector<Replication>(cfg.seeds.size()), {}};
  std::optional<ClassificationTask> ctask;
  std::optional<RankingTask> rtask;
  if (cfg.is_ranking()) rtask = load_ranking(cfg);
  else ctask = load_classification(cfg);
  if (ctask) out.label_names = ctask->label_names;

  const std::size_t workers = std::max<std::size_t>(
      1, std::min(cfg.seeds.size(), cfg.threads ? cfg.threads : std::max(1U, std::thread::hardware_concurrency())));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
      try {
        out.replications[i] = cfg.is_ranking() ? detail::run_ranking_seed(cfg, *rtask, cfg.seeds[i])
                                               : detail::run_classification_seed(cfg, *ctask, cfg.seeds[i]);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ---------------------------------------------------------------------------
// Artifact files

inline void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows) {
  out << "t,action,reward,propensity,mean_w,lcb_w,mean_d,ucb_d,deployed_flag,cumulative_reward\n";
  for (const auto& r : rows) {
    out << r.t << ',' << r.action << ',' << format_number(r.reward) << ',' << format_number(r.propensity) << ','
        << format_number(r.mean_w) << ',' << format_number(r.lcb_w) << ',' << format_number(r.mean_d) << ','
        << format_number(r.ucb_d) << ',' << (r.deployed ? 1 : 0) << ',' << format_number(r.cumulative_reward) << '\n';
  }
}

inline void write_metrics_csv(std::ostream& out, const ExperimentResult& res) {
  out << "method,seed,checkpoint,metric,value\n";
  for (const auto& rep : res.replications) {
    for (const auto& m : rep.metrics) {
      out << res.config.method << ',' << rep.seed << ',' << m.checkpoint << ',' << m.metric << ','
          << format_number(m.value) << '\n';
    }
  }
}

/// Mean and sample standard deviation across seeds, per (checkpoint, metric).
inline void write_aggregate_csv(std::ostream& out, const ExperimentResult& res) {
  std::map<std::pair<std::size_t, std::string>, std::vector<double>> groups;
  std::vector<std::pair<std::size_t, std::string>> order;
  for (const auto& rep : res.replications) {
    for (const auto& m : rep.metrics) {
      auto [it, inserted] = groups.try_emplace({m.checkpoint, m.metric});
      if (inserted) order.push_back(it->first);
      it->second.push_back(m.value);
    }
  }
  out << "method,checkpoint,metric,mean,std,n\n";
  for (const auto& key : order) {
    const auto& v = groups[key];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    out << res.config.method << ',' << key.first << ',' << key.second << ',' << format_number(mean) << ','
        << format_number(sd) << ',' << v.size() << '\n';
  }
}

inline std::string trace_file_name(const std::string& method, std::uint64_t seed) {
  return "trace_" + method + "_seed" + std::to_string(seed) + ".csv";
}

/// Config echo, build identity and the derived RNG streams of every seed.
inline nlohmann::json make_manifest(const ExperimentResult& res, const std::vector<std::string>& files) {
  nlohmann::json j;
  j["config"] = to_json(res.config);
  j["git_describe"] = SEA_GIT_DESCRIBE;
  nlohmann::json streams = nlohmann::json::array();
  for (auto seed : res.config.seeds) {
    const auto s = derive_streams(seed);
    streams.push_back({{"seed", seed}, {"baseline", s.baseline}, {"environment", s.environment}, {"policy", s.policy}});
  }
  j["rng_streams"] = streams;
  nlohmann::json deps = nlohmann::json::object();
  for (const auto& rep : res.replications) deps[std::to_string(rep.seed)] = rep.deployments;
  j["deployments"] = deps;
  if (!res.label_names.empty()) j["label_names"] = res.label_names;
  j["files"] = files;
  return j;
}

/// Resolves a relative output directory against `root` (e.g. from an environment variable).
inline std::filesystem::path resolve_output_dir(const std::string& dir, const std::optional<std::string>& root) {
  std::filesystem::path p(dir);
  if (p.is_absolute() || !root || root->empty()) return p;
  return std::filesystem::path(*root) / p;
}

/// Writes traces, tidy metrics, aggregate and manifest; returns the files written.
inline std::vector<std::string> write_artifacts(const ExperimentResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
    files.push_back(name);
    return f;
  };
  const auto& method = res.config.method;
  for (const auto& rep : res.replications) {
    auto f = open(trace_file_name(method, rep.seed));
    write_trace_csv(f, rep.rows);
  }
  {
    auto f = open("metrics_" + method + ".csv");
    write_metrics_csv(f, res);
  }
  {
    auto f = open("aggregate_" + method + ".csv");
    write_aggregate_csv(f, res);
  }
  const std::string manifest_name = "manifest_" + method + ".json";
  auto listed = files;
  listed.push_back(manifest_name);
  auto f = open(manifest_name);
  f << make_manifest(res, listed).dump(2) << '\n';
  return files;
}

/// Validates, runs and writes artifacts under `dir`.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  auto res = run_replications(cfg);
  write_artifacts(res, dir);
  return res;
}

}  // namespace sea
