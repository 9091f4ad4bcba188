#pragma once
// Safe exploration loop. Every round the deployed policy acts, the learned policy
// takes one counterfactual step on the new interaction, and the learned policy
// replaces the deployed one only when LCB(learned) >= UCB(deployed) on the whole log.
// The boundless mode compares plain means instead of bounds.

#include <functional>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "sea/core_types.hpp"
#include "sea/environments.hpp"
#include "sea/estimators.hpp"
#include "sea/learners.hpp"
#include "sea/policies.hpp"

namespace sea {

enum class DeployMode { Sea, Bsea };

inline bool deployment_check(const PolicyEvaluation& learned, const PolicyEvaluation& deployed) {
  return learned.lcb >= deployed.ucb;
}

struct DeploymentRecord {
  std::size_t t = 0;
  PolicyEvaluation learned;
  PolicyEvaluation deployed;
};

/// Either the frozen baseline or a deployed snapshot of the learned policy.
/// Snapshots keep a uniform floor so every logged propensity stays >= epsilon / n.
class ActingPolicy {
 public:
  using Snapshot = UniformMixture<SoftmaxLinearPolicy>;

  explicit ActingPolicy(EpsilonGreedyPolicy baseline) : impl_(std::move(baseline)) {}
  explicit ActingPolicy(Snapshot snapshot) : impl_(std::move(snapshot)) {}

  [[nodiscard]] std::size_t n_actions() const {
    return std::visit([](const auto& p) { return p.n_actions(); }, impl_);
  }
  [[nodiscard]] Vector probabilities(const Vector& x) const {
    return std::visit([&](const auto& p) { return p.probabilities(x); }, impl_);
  }
  [[nodiscard]] Matrix probabilities_batch(const Matrix& xs) const {
    return std::visit([&](const auto& p) { return p.probabilities_batch(xs); }, impl_);
  }
  [[nodiscard]] double min_propensity() const {
    return std::visit([](const auto& p) { return p.min_propensity(); }, impl_);
  }
  [[nodiscard]] bool is_baseline() const { return std::holds_alternative<EpsilonGreedyPolicy>(impl_); }
  [[nodiscard]] const Snapshot* snapshot() const { return std::get_if<Snapshot>(&impl_); }

 private:
  std::variant<EpsilonGreedyPolicy, Snapshot> impl_;
};

struct SeaConfig {
  DeployMode mode = DeployMode::Sea;
  double delta = 0.05;
  double deploy_epsilon = 0.1;  // uniform floor kept by deployed snapshots
  LearnerConfig learner;
  bool keep_log = true;
};

class SeaState {
 public:
  /// The learned policy starts from the baseline's weights (warm start).
  SeaState(EpsilonGreedyPolicy baseline, SeaConfig cfg)
      : baseline_(baseline),
        learned_(baseline.weights),
        deployed_(baseline),
        cfg_(cfg) {
    cfg_.learner.validate();
    if (!(cfg_.deploy_epsilon > 0.0 && cfg_.deploy_epsilon <= 1.0)) {
      throw ValidationError("deploy_epsilon must lie in (0, 1]");
    }
    const double min_p = std::min(baseline_.min_propensity(), cfg_.deploy_epsilon / static_cast<double>(baseline_.n_actions()));
    params_ = ConfidenceParams(cfg_.delta, reward_bound_b(1.0, min_p));
  }

  [[nodiscard]] const EpsilonGreedyPolicy& baseline() const { return baseline_; }
  [[nodiscard]] const SoftmaxLinearPolicy& learned() const { return learned_; }
  [[nodiscard]] const ActingPolicy& deployed() const { return deployed_; }
  [[nodiscard]] const InteractionLog& log() const { return log_; }
  [[nodiscard]] const StreamingEstimatorState& estimator() const { return estimator_; }
  [[nodiscard]] const std::vector<DeploymentRecord>& deployments() const { return deployments_; }
  [[nodiscard]] const ConfidenceParams& params() const { return params_; }
  [[nodiscard]] const SeaConfig& config() const { return cfg_; }
  [[nodiscard]] DeployMode mode() const { return cfg_.mode; }
  [[nodiscard]] std::size_t t() const { return estimator_.t(); }

  /// The learned policy in the form it would be deployed.
  [[nodiscard]] ActingPolicy::Snapshot candidate() const { return {learned_, cfg_.deploy_epsilon}; }

  [[nodiscard]] PolicyEvaluation evaluate_candidate() const {
    EstimateMoments m{estimator_.t(), 0.0, 0.0};
    if (!estimator_.entries().empty()) {
      const double floor = cfg_.deploy_epsilon / static_cast<double>(learned_.n_actions());
      const Matrix probs = ((1.0 - cfg_.deploy_epsilon) * softmax_columns(logit_cache_).array() + floor).matrix();
      m = estimator_.moments_from_probabilities(probs);
    }
    return cfg_.mode == DeployMode::Sea ? make_evaluation(m, params_) : make_boundless_evaluation(m);
  }
  [[nodiscard]] PolicyEvaluation evaluate_deployed() const {
    return cfg_.mode == DeployMode::Sea ? make_evaluation(deployed_moments_, params_)
                                        : make_boundless_evaluation(deployed_moments_);
  }

  /// Records a new interaction: log, aggregate table, deployed moments, learner step.
  void observe(const LoggedInteraction& item) {
    if (cfg_.keep_log) log_.append(item);
    estimator_.update(item);
    const double pi_d = deployed_.probabilities(item.context.values)[static_cast<Eigen::Index>(item.action.id)];
    deployed_moments_.add(item.weighted_reward() * pi_d);
    learn(item);
  }

  /// Deploys a snapshot of the learned policy at round t.
  void deploy(std::size_t t, const PolicyEvaluation& ev_w, const PolicyEvaluation& ev_d) {
    if (!deployments_.empty() && deployments_.back().t >= t) throw ValidationError("deployments must be strictly increasing in t");
    deployed_ = ActingPolicy(candidate());
    deployed_moments_ = estimator_.moments(deployed_);
    deployments_.push_back({t, ev_w, ev_d});
  }

 private:
  // Same step as ips_sgd_step, also keeping logit_cache_ (learned logits of every
  // table context) current with a rank-1 update instead of a full product.
  void learn(const LoggedInteraction& item) {
    const Eigen::Index known = logit_cache_.cols();
    const double scale = cfg_.learner.learn_rate * item.weighted_reward();
    if (scale != 0.0) {
      const Vector coeffs = scale * softmax_prob_gradient_coeffs(learned_, item.context.values, item.action);
      learned_.weights.noalias() += coeffs * item.context.values.transpose();
      if (known > 0) {
        const Eigen::RowVectorXd proj = item.context.values.transpose() * estimator_.contexts().leftCols(known);
        logit_cache_.noalias() += (coeffs / learned_.temperature) * proj;
      }
    }
    const auto total = static_cast<Eigen::Index>(estimator_.n_contexts());
    if (++rounds_since_refresh_ >= kCacheRefresh) {
      logit_cache_ = learned_.weights * estimator_.contexts() / learned_.temperature;
      rounds_since_refresh_ = 0;
    } else if (total > known) {
      logit_cache_.conservativeResize(learned_.weights.rows(), total);
      logit_cache_.rightCols(total - known) =
          learned_.weights * estimator_.contexts().rightCols(total - known) / learned_.temperature;
    }
  }

  static constexpr std::size_t kCacheRefresh = 4096;

  EpsilonGreedyPolicy baseline_;
  SoftmaxLinearPolicy learned_;
  Matrix logit_cache_;
  std::size_t rounds_since_refresh_ = 0;
  ActingPolicy deployed_;
  SeaConfig cfg_;
  ConfidenceParams params_;
  InteractionLog log_;
  StreamingEstimatorState estimator_;
  EstimateMoments deployed_moments_;
  std::vector<DeploymentRecord> deployments_;
};

struct SeaRoundResult {
  LoggedInteraction interaction;
  ActionId truth;
  PolicyEvaluation learned;
  PolicyEvaluation deployed;
  bool deployed_now = false;
};

/// One round against any environment exposing next() -> {context, truth} and reward(action, truth).
template <class Env, class Rng>
SeaRoundResult sea_round(SeaState& state, Env& env, Rng& policy_rng) {
  auto draw = env.next();
  const auto [action, propensity] = sample_action(state.deployed(), draw.context, policy_rng);
  const double r = env.reward(action, draw.truth);
  SeaRoundResult res{LoggedInteraction{std::move(draw.context), action, r, propensity}, draw.truth, {}, {}, false};
  state.observe(res.interaction);
  res.learned = state.evaluate_candidate();
  res.deployed = state.evaluate_deployed();
  if (deployment_check(res.learned, res.deployed)) {
    state.deploy(state.t(), res.learned, res.deployed);
    res.deployed_now = true;
  }
  return res;
}

struct TraceRow {
  std::size_t t = 0;
  std::size_t action = 0;
  double reward = 0.0;
  double propensity = 1.0;
  double mean_w = std::numeric_limits<double>::quiet_NaN();
  double lcb_w = std::numeric_limits<double>::quiet_NaN();
  double mean_d = std::numeric_limits<double>::quiet_NaN();
  double ucb_d = std::numeric_limits<double>::quiet_NaN();
  bool deployed = false;
  double cumulative_reward = 0.0;
};

struct SeaTrace {
  std::vector<TraceRow> rows;
  std::vector<std::size_t> truths;  // correct action per round, when the env knows it
  std::vector<DeploymentRecord> deployments;

  [[nodiscard]] std::optional<std::size_t> first_deployment() const {
    if (deployments.empty()) return std::nullopt;
    return deployments.front().t;
  }
  [[nodiscard]] std::vector<double> rewards() const {
    std::vector<double> r;
    r.reserve(rows.size());
    for (const auto& row : rows) r.push_back(row.reward);
    return r;
  }
};

/// Runs `horizon` rounds; `on_checkpoint(t, state)` fires after each listed round.
template <class Env, class Rng>
SeaTrace sea_run(SeaState& state, Env& env, std::size_t horizon, Rng& policy_rng,
                 std::span<const std::size_t> checkpoints = {},
                 const std::function<void(std::size_t, const SeaState&)>& on_checkpoint = {}) {
  SeaTrace trace;
  trace.rows.reserve(horizon);
  double cumulative = 0.0;
  std::size_t next_cp = 0;
  for (std::size_t round = 1; round <= horizon; ++round) {
    const auto res = sea_round(state, env, policy_rng);
    cumulative += res.interaction.reward;
    trace.rows.push_back(TraceRow{round, res.interaction.action.id, res.interaction.reward, res.interaction.propensity,
                                  res.learned.mean, res.learned.lcb, res.deployed.mean, res.deployed.ucb,
                                  res.deployed_now, cumulative});
    trace.truths.push_back(res.truth.id);
    while (next_cp < checkpoints.size() && checkpoints[next_cp] < round) ++next_cp;
    if (on_checkpoint && next_cp < checkpoints.size() && checkpoints[next_cp] == round) on_checkpoint(round, state);
  }
  trace.deployments = state.deployments();
  return trace;
}

// ---------------------------------------------------------------------------
// Ranking variant: deterministic rankers, examination propensities per click.

struct RankingSeaConfig {
  DeployMode mode = DeployMode::Sea;
  double delta = 0.05;
  LearnerConfig learner{.learn_rate = 0.001};
};

class RankingSeaState {
 public:
  RankingSeaState(LinearRanker baseline, const ExaminationModel& model, RankingSeaConfig cfg)
      : baseline_(baseline), learned_(baseline), deployed_(std::move(baseline)), cfg_(cfg),
        params_(cfg.delta, ranking_reward_bound(model.min_propensity())) {
    cfg_.learner.validate();
  }

  [[nodiscard]] const LinearRanker& baseline() const { return baseline_; }
  [[nodiscard]] const LinearRanker& learned() const { return learned_; }
  [[nodiscard]] const LinearRanker& deployed() const { return deployed_; }
  [[nodiscard]] const ClickLog& log() const { return log_; }
  [[nodiscard]] const std::vector<DeploymentRecord>& deployments() const { return deployments_; }
  [[nodiscard]] const ConfidenceParams& params() const { return params_; }
  [[nodiscard]] std::size_t t() const { return log_.size(); }

  [[nodiscard]] PolicyEvaluation finish(const EstimateMoments& m) const {
    return cfg_.mode == DeployMode::Sea ? make_evaluation(m, params_) : make_boundless_evaluation(m);
  }

  [[nodiscard]] PolicyEvaluation evaluate_learned(std::span<const Matrix> query_docs) const {
    const auto terms = ranking_ips_terms(log_, query_docs, learned_);
    return finish(moments_of(terms));
  }
  [[nodiscard]] PolicyEvaluation evaluate_deployed() const { return finish(deployed_moments_); }

  /// `clicks` come from showing the deployed ranking for `query`.
  void observe(std::size_t query, std::span<const ClickRecord> clicks, const Matrix& docs) {
    RankingRound round{query, clicked_docs(clicks)};
    double term = 0.0;
    for (const auto& c : clicks) {
      if (c.clicked) term += rank_weight(c.rank) / c.propensity;
    }
    deployed_moments_.add(term);
    ranking_ips_step(learned_, docs, round.clicks, cfg_.learner);
    log_.append(std::move(round));
  }

  void deploy(std::size_t t, const PolicyEvaluation& ev_w, const PolicyEvaluation& ev_d,
              std::span<const Matrix> query_docs) {
    deployed_ = learned_;
    deployed_moments_ = moments_of(ranking_ips_terms(log_, query_docs, deployed_));
    deployments_.push_back({t, ev_w, ev_d});
  }

 private:
  LinearRanker baseline_;
  LinearRanker learned_;
  LinearRanker deployed_;
  RankingSeaConfig cfg_;
  ConfidenceParams params_;
  ClickLog log_;
  EstimateMoments deployed_moments_;
  std::vector<DeploymentRecord> deployments_;
};

struct RankingRoundResult {
  std::size_t query = 0;
  RankedList shown;
  std::vector<ClickRecord> clicks;
  PolicyEvaluation learned;
  PolicyEvaluation deployed;
  bool deployed_now = false;
};

inline RankingRoundResult ranking_sea_round(RankingSeaState& state, RankingEnv& env) {
  RankingRoundResult res;
  res.query = env.next_query();
  const auto& docs = env.data().docs[res.query];
  res.shown = rank_candidates(state.deployed(), docs);
  res.clicks = env.clicks(res.query, res.shown);
  state.observe(res.query, res.clicks, docs);
  res.learned = state.evaluate_learned(env.data().docs);
  res.deployed = state.evaluate_deployed();
  if (deployment_check(res.learned, res.deployed)) {
    state.deploy(state.t(), res.learned, res.deployed, env.data().docs);
    res.deployed_now = true;
  }
  return res;
}

}  // namespace sea
