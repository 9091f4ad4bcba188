#pragma once
// Simulated environments: classification turned into a contextual bandit, and a
// ranking environment with position-biased examination and graded click noise.

#include <array>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "sea/core_types.hpp"
#include "sea/data_io.hpp"
#include "sea/policies.hpp"

namespace sea {

// ---------------------------------------------------------------------------
// Rewards for classification

struct RewardProfile {
  enum class Kind { Perfect, NearRandom };
  Kind kind = Kind::Perfect;
  double p_correct = 0.6;
  double p_incorrect = 0.4;

  static RewardProfile perfect() { return {Kind::Perfect, 1.0, 0.0}; }
  static RewardProfile near_random() { return {Kind::NearRandom, 0.6, 0.4}; }

  /// Expected reward for a correct / incorrect choice.
  [[nodiscard]] double expected(bool correct) const {
    if (kind == Kind::Perfect) return correct ? 1.0 : 0.0;
    return correct ? p_correct : p_incorrect;
  }
  [[nodiscard]] std::string name() const { return kind == Kind::Perfect ? "perfect" : "near-random"; }
};

inline RewardProfile reward_profile_by_name(std::string_view name) {
  if (name == "perfect") return RewardProfile::perfect();
  if (name == "near-random") return RewardProfile::near_random();
  throw ValidationError("unknown reward profile '" + std::string(name) + "' (expected perfect | near-random)");
}

template <class Rng>
double classification_reward(ActionId chosen, ActionId truth, const RewardProfile& profile, Rng& rng) {
  const bool correct = chosen == truth;
  if (profile.kind == RewardProfile::Kind::Perfect) return correct ? 1.0 : 0.0;
  std::bernoulli_distribution coin(correct ? profile.p_correct : profile.p_incorrect);
  return coin(rng) ? 1.0 : 0.0;
}

// ---------------------------------------------------------------------------
// Clicks for ranking

struct ExaminationModel {
  double bias_severity = 1.0;  // eta
  std::size_t cutoff = kClickCutoff;

  /// Smallest non-zero examination probability, at the cutoff rank.
  [[nodiscard]] double min_propensity() const {
    return std::pow(1.0 / static_cast<double>(cutoff), bias_severity);
  }
};

/// (1/rank)^eta within the cutoff, 0 beyond.
inline double examination_probability(const ExaminationModel& model, std::size_t rank) {
  if (rank == 0) throw ValidationError("ranks are 1-based");
  if (rank > model.cutoff) return 0.0;
  return std::pow(1.0 / static_cast<double>(rank), model.bias_severity);
}

struct ClickProfile {
  std::string name;
  std::array<double, 5> probs{};  // P(click | relevance grade 0..4)

  static ClickProfile perfect() { return {"perfect", {0.00, 0.20, 0.40, 0.80, 1.00}}; }
  static ClickProfile position_biased() { return {"position-biased", {0.10, 0.10, 0.10, 1.00, 1.00}}; }
  static ClickProfile near_random() { return {"near-random", {0.40, 0.45, 0.50, 0.55, 0.60}}; }
};

inline ClickProfile click_profile_by_name(std::string_view name) {
  if (name == "perfect") return ClickProfile::perfect();
  if (name == "position-biased") return ClickProfile::position_biased();
  if (name == "near-random") return ClickProfile::near_random();
  throw ValidationError("unknown click profile '" + std::string(name) +
                        "' (expected perfect | position-biased | near-random)");
}

/// One record per displayed position. Each top-cutoff rank is examined
/// independently; an examined doc is clicked with the profile's probability.
template <class Rng>
std::vector<ClickRecord> simulate_clicks(const RankedList& list, std::span<const int> grades,
                                         const ExaminationModel& model, const ClickProfile& profile, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<ClickRecord> out;
  out.reserve(list.size());
  for (std::size_t pos = 0; pos < list.size(); ++pos) {
    ClickRecord rec;
    rec.rank = pos + 1;
    rec.doc_id = list.doc_ids[pos];
    rec.propensity = examination_probability(model, rec.rank);
    if (rec.propensity > 0.0) {
      rec.examined = unif(rng) < rec.propensity;
      if (rec.examined) {
        const int g = grades[rec.doc_id];
        if (g < 0 || g > 4) throw ValidationError("relevance grade outside 0..4");
        rec.clicked = unif(rng) < profile.probs[static_cast<std::size_t>(g)];
      }
    }
    out.push_back(rec);
  }
  return out;
}

inline std::vector<LoggedClick> clicked_docs(std::span<const ClickRecord> records) {
  std::vector<LoggedClick> out;
  for (const auto& r : records) {
    if (r.clicked) out.push_back({r.doc_id, r.propensity});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification as a bandit

/// Streams instances uniformly with replacement from a fixed pool.
class ClassificationEnv {
 public:
  ClassificationEnv(std::shared_ptr<const ClassificationData> pool, RewardProfile profile, std::uint64_t seed)
      : pool_(std::move(pool)), profile_(profile), rng_(seed) {
    if (!pool_ || pool_->size() == 0) throw ValidationError("classification pool is empty");
  }

  struct Draw {
    ContextVector context;
    std::size_t index = 0;
    ActionId truth;
  };

  Draw next() {
    std::uniform_int_distribution<std::size_t> pick(0, pool_->size() - 1);
    const auto i = pick(rng_);
    return {pool_->context(i), i, ActionId(pool_->labels[i])};
  }

  double reward(ActionId chosen, ActionId truth) { return classification_reward(chosen, truth, profile_, rng_); }

  [[nodiscard]] const ClassificationData& pool() const { return *pool_; }
  [[nodiscard]] const RewardProfile& profile() const { return profile_; }
  [[nodiscard]] std::size_t n_actions() const { return pool_->n_classes; }

 private:
  std::shared_ptr<const ClassificationData> pool_;
  RewardProfile profile_;
  std::mt19937_64 rng_;
};

struct ClassificationStep {
  LoggedInteraction interaction;
  ActionId truth;
  std::size_t index = 0;
};

/// One bandit round: next instance, sample from the policy, observe the reward.
template <StochasticPolicy P, class Rng>
ClassificationStep classification_round(ClassificationEnv& env, const P& policy, Rng& policy_rng) {
  auto draw = env.next();
  const auto [action, propensity] = sample_action(policy, draw.context, policy_rng);
  const double r = env.reward(action, draw.truth);
  return {LoggedInteraction{std::move(draw.context), action, r, propensity}, draw.truth, draw.index};
}

/// Exact expected reward of a policy when contexts are drawn uniformly from `data`.
template <StochasticPolicy P>
double true_policy_value(const P& policy, const ClassificationData& data, const RewardProfile& profile) {
  const Matrix probs = policy.probabilities_batch(data.features.transpose());
  double total = 0.0;
  const double gap = profile.expected(true) - profile.expected(false);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double p_correct = probs(static_cast<Eigen::Index>(data.labels[i]), static_cast<Eigen::Index>(i));
    total += profile.expected(false) + gap * p_correct;
  }
  return total / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Ranking environment

class RankingEnv {
 public:
  RankingEnv(std::shared_ptr<const RankingData> queries, ExaminationModel model, ClickProfile profile,
             std::uint64_t seed)
      : data_(std::move(queries)), model_(model), profile_(std::move(profile)), rng_(seed) {
    if (!data_ || data_->size() == 0) throw ValidationError("ranking environment has no queries");
  }

  std::size_t next_query() {
    std::uniform_int_distribution<std::size_t> pick(0, data_->size() - 1);
    return pick(rng_);
  }

  std::vector<ClickRecord> clicks(std::size_t query, const RankedList& shown) {
    return simulate_clicks(shown, data_->grades[query], model_, profile_, rng_);
  }

  [[nodiscard]] const RankingData& data() const { return *data_; }
  [[nodiscard]] const ExaminationModel& model() const { return model_; }
  [[nodiscard]] const ClickProfile& profile() const { return profile_; }

 private:
  std::shared_ptr<const RankingData> data_;
  ExaminationModel model_;
  ClickProfile profile_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Supervised baselines trained on a subsample

struct SupervisedConfig {
  std::size_t epochs = 20;
  double learn_rate = 0.01;
  double epsilon = 0.1;
  std::size_t class_retries = 100;
};

/// Multinomial logistic regression by plain SGD on cross-entropy.
template <class Rng>
Matrix train_logistic(const ClassificationData& data, std::span<const std::size_t> rows, const SupervisedConfig& cfg,
                      Rng& rng) {
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(data.n_classes), static_cast<Eigen::Index>(data.dim()));
  std::vector<std::size_t> order(rows.begin(), rows.end());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      const Vector x = data.features.row(static_cast<Eigen::Index>(i)).transpose();
      Vector g = -softmax(w * x);
      g[static_cast<Eigen::Index>(data.labels[i])] += 1.0;
      w.noalias() += (cfg.learn_rate * g) * x.transpose();
    }
  }
  return w;
}

/// Subsamples the pool (retrying until every class appears, when possible), trains
/// a logistic model, and returns the weights.
template <class Rng>
Matrix make_baseline_weights(const ClassificationData& pool, double fraction, const SupervisedConfig& cfg, Rng& rng) {
  if (pool.size() == 0) throw ValidationError("baseline needs a non-empty training pool");
  std::vector<std::size_t> rows;
  for (std::size_t attempt = 0; attempt <= cfg.class_retries; ++attempt) {
    rows = subsample_indices(pool.size(), fraction, rng);
    std::vector<char> seen(pool.n_classes, 0);
    for (auto i : rows) seen[pool.labels[i]] = 1;
    if (std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; })) break;
  }
  if (rows.empty()) throw ValidationError("baseline subsample is empty");
  return train_logistic(pool, rows, cfg, rng);
}

template <class Rng>
EpsilonGreedyPolicy make_baseline(const ClassificationData& pool, double fraction, const SupervisedConfig& cfg,
                                  Rng& rng) {
  return EpsilonGreedyPolicy(make_baseline_weights(pool, fraction, cfg, rng), cfg.epsilon);
}

/// Pairwise hinge SGD over all differently graded document pairs.
template <class Rng>
LinearRanker train_pairwise_ranker(const RankingData& data, std::span<const std::size_t> queries,
                                   const SupervisedConfig& cfg, Rng& rng) {
  LinearRanker ranker(data.dim());
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> pairs;
  for (auto q : queries) {
    const auto& g = data.grades[q];
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j)
        if (g[i] > g[j]) pairs.emplace_back(q, i, j);
  }
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    for (const auto& [q, i, j] : pairs) {
      const Vector diff = (data.docs[q].row(static_cast<Eigen::Index>(i)) - data.docs[q].row(static_cast<Eigen::Index>(j))).transpose();
      if (ranker.weights.dot(diff) < 1.0) ranker.weights += cfg.learn_rate * diff;
    }
  }
  return ranker;
}

template <class Rng>
LinearRanker make_ranking_baseline(const RankingData& pool, double fraction, const SupervisedConfig& cfg, Rng& rng) {
  if (pool.size() == 0) throw ValidationError("baseline needs a non-empty query pool");
  const auto queries = subsample_indices(pool.size(), fraction, rng);
  return train_pairwise_ranker(pool, queries, cfg, rng);
}

// ---------------------------------------------------------------------------
// Synthetic datasets

struct SyntheticClassificationSpec {
  std::size_t n_classes = 10;
  std::size_t n_features = 20;  // last feature is a constant 1
  std::size_t n_train = 3000;
  std::size_t n_test = 1000;
  double separation = 0.7;      // std-dev of the class means
  double noise = 1.0;
};

/// Gaussian class clusters; rows are rounded to 4 decimals so files round-trip.
inline std::pair<ClassificationDataset, ClassificationDataset> make_synthetic_classification(
    const SyntheticClassificationSpec& spec, std::uint64_t seed) {
  if (spec.n_features < 2 || spec.n_classes < 2) throw ValidationError("synthetic data needs >= 2 classes and features");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto informative = static_cast<Eigen::Index>(spec.n_features - 1);
  Matrix means(static_cast<Eigen::Index>(spec.n_classes), informative);
  for (Eigen::Index c = 0; c < means.rows(); ++c)
    for (Eigen::Index f = 0; f < informative; ++f) means(c, f) = spec.separation * gauss(rng);

  auto draw = [&](std::size_t count) {
    ClassificationDataset ds;
    ds.n_features = spec.n_features;
    for (std::size_t c = 0; c < spec.n_classes; ++c) ds.label_names.push_back(std::to_string(c));
    std::uniform_int_distribution<std::size_t> pick(0, spec.n_classes - 1);
    for (std::size_t i = 0; i < count; ++i) {
      const auto label = pick(rng);
      Vector x(static_cast<Eigen::Index>(spec.n_features));
      for (Eigen::Index f = 0; f < informative; ++f) {
        x[f] = std::round((means(static_cast<Eigen::Index>(label), f) + spec.noise * gauss(rng)) * 1e4) / 1e4;
      }
      x[informative] = 1.0;
      ds.rows.push_back(sparse_from_dense(x));
      ds.labels.push_back(label);
    }
    return ds;
  };
  auto train = draw(spec.n_train);
  auto test = draw(spec.n_test);
  return {std::move(train), std::move(test)};
}

struct SyntheticRankingSpec {
  std::size_t n_queries = 500;
  std::size_t docs_per_query = 30;
  std::size_t n_features = 10;
  double label_noise = 0.5;
};

/// Documents with Gaussian features; grades 0..4 from thresholding a noisy linear
/// relevance score, skewed toward non-relevant like web-search judgments.
inline LtrDataset make_synthetic_ranking(const SyntheticRankingSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector truth(static_cast<Eigen::Index>(spec.n_features));
  for (Eigen::Index f = 0; f < truth.size(); ++f) truth[f] = gauss(rng);
  truth /= truth.norm();
  constexpr std::array<double, 4> thresholds{0.3, 1.0, 1.5, 2.0};
  LtrDataset ds;
  ds.n_features = spec.n_features;
  for (std::size_t q = 0; q < spec.n_queries; ++q) {
    LtrQuery query;
    query.qid = std::to_string(q + 1);
    for (std::size_t d = 0; d < spec.docs_per_query; ++d) {
      Vector x(static_cast<Eigen::Index>(spec.n_features));
      for (Eigen::Index f = 0; f < x.size(); ++f) x[f] = std::round(gauss(rng) * 1e4) / 1e4;
      const double score = truth.dot(x) + spec.label_noise * gauss(rng);
      int grade = 0;
      for (double t : thresholds) grade += score > t ? 1 : 0;
      query.docs.push_back(sparse_from_dense(x));
      query.grades.push_back(grade);
    }
    ds.queries.push_back(std::move(query));
  }
  return ds;
}

}  // namespace sea
