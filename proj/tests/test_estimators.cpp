#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sea/estimators.hpp"

namespace sea {
namespace {

/// Fixed probability table per context key; lets tests dictate pi(a|x) exactly.
struct TablePolicy {
  Matrix probs;  // n x contexts, column = context key (stored in x[0])

  [[nodiscard]] std::size_t n_actions() const { return static_cast<std::size_t>(probs.rows()); }
  [[nodiscard]] Vector probabilities(const Vector& x) const { return probs.col(static_cast<Eigen::Index>(x[0])); }
  [[nodiscard]] Matrix probabilities_batch(const Matrix& xs) const {
    Matrix out(probs.rows(), xs.cols());
    for (Eigen::Index k = 0; k < xs.cols(); ++k) out.col(k) = probabilities(xs.col(k));
    return out;
  }
};

LoggedInteraction keyed(std::int64_t key, std::size_t a, double r, double p) {
  return {ContextVector(Vector::Constant(1, static_cast<double>(key)), key), ActionId(a), r, p};
}

/// Three contexts; (r/p, pi) = (2, 0.5), (4, 0.25), (1, 1.0).
std::pair<InteractionLog, TablePolicy> three_entry_example() {
  InteractionLog log;
  log.append(keyed(0, 0, 1.0, 0.5));
  log.append(keyed(1, 1, 1.0, 0.25));
  log.append(keyed(2, 0, 1.0, 1.0));
  Matrix probs(2, 3);
  probs << 0.5, 0.75, 1.0,
           0.5, 0.25, 0.0;
  return {log, TablePolicy{probs}};
}

double naive_mean(const InteractionLog& log, const TablePolicy& p) {
  double s = 0.0;
  for (const auto& it : log) s += it.weighted_reward() * p.probabilities(it.context.values)[static_cast<Eigen::Index>(it.action.id)];
  return s / static_cast<double>(log.size());
}

TEST(PointTerms, OnPolicyTermEqualsReward) {
  InteractionLog log;
  log.append(keyed(0, 0, 1.0, 0.5));
  const TablePolicy p{Matrix::Constant(2, 1, 0.5)};
  EXPECT_EQ(ips_point_terms(log, p), std::vector<double>{1.0});
}

TEST(PointTerms, NeverTakenActionGivesZero) {
  InteractionLog log;
  log.append(keyed(0, 1, 1.0, 0.2));
  Matrix probs(2, 1);
  probs << 1.0, 0.0;
  EXPECT_EQ(ips_point_terms(log, TablePolicy{probs}), std::vector<double>{0.0});
}

TEST(PointTerms, ThreeEntryExample) {
  const auto [log, p] = three_entry_example();
  EXPECT_EQ(ips_point_terms(log, p), (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(Aggregate, AccumulatesSameKey) {
  StreamingEstimatorState s;
  s = aggregate_update(std::move(s), keyed(4, 1, 1.0, 0.5));
  s = aggregate_update(std::move(s), keyed(4, 1, 0.75, 0.25));
  ASSERT_EQ(s.entries().size(), 1u);
  EXPECT_DOUBLE_EQ(s.entries()[0].weight_sum, 5.0);
  EXPECT_DOUBLE_EQ(s.entries()[0].weight_sq_sum, 4.0 + 9.0);
  EXPECT_EQ(s.t(), 2u);
}

TEST(Aggregate, DistinctKeysDistinctEntries) {
  StreamingEstimatorState s;
  s.update(keyed(0, 1, 1.0, 0.5));
  s.update(keyed(1, 1, 1.0, 0.5));
  s.update(keyed(0, 0, 1.0, 0.5));
  EXPECT_EQ(s.entries().size(), 3u);
  EXPECT_EQ(s.n_contexts(), 2u);
}

TEST(Aggregate, ZeroRewardOnlyCounts) {
  StreamingEstimatorState s;
  s.update(keyed(0, 1, 1.0, 0.5));
  s.update(keyed(0, 1, 0.0, 0.5));
  EXPECT_EQ(s.t(), 2u);
  EXPECT_DOUBLE_EQ(s.entries()[0].weight_sum, 2.0);
}

TEST(Aggregate, RequiresKeyAndValidItem) {
  StreamingEstimatorState s;
  LoggedInteraction unkeyed{ContextVector(Vector::Ones(1)), ActionId(0), 1.0, 0.5};
  EXPECT_THROW(s.update(unkeyed), ValidationError);
  EXPECT_THROW(s.update(keyed(0, 0, 1.0, 0.0)), ValidationError);
  EXPECT_EQ(s.t(), 0u);
}

TEST(FastMean, ThreeEntryExample) {
  const auto [log, p] = three_entry_example();
  StreamingEstimatorState s;
  for (const auto& it : log) s.update(it);
  EXPECT_DOUBLE_EQ(estimate_mean_fast(s, p), 1.0);
  EXPECT_DOUBLE_EQ(estimate_mean_fast(s, p), naive_mean(log, p));
}

TEST(FastMean, ZeroOnLoggedPairsGivesZero) {
  const auto [log, p] = three_entry_example();
  StreamingEstimatorState s;
  for (const auto& it : log) s.update(it);
  Matrix probs(2, 3);
  probs << 0.0, 1.0, 0.0,
           1.0, 0.0, 1.0;
  EXPECT_EQ(estimate_mean_fast(s, TablePolicy{probs}), 0.0);
}

TEST(FastMean, EmptyStateThrows) {
  EXPECT_THROW(estimate_mean_fast(StreamingEstimatorState{}, TablePolicy{Matrix::Ones(1, 1)}), ValidationError);
}

TEST(FastMean, MatchesNaiveOnRandomLogs) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::int64_t> ctx(0, 29);
  std::uniform_int_distribution<std::size_t> act(0, 5);
  std::uniform_real_distribution<double> unif(0.01, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix probs(6, 30);
    for (auto& v : probs.reshaped()) v = unif(rng);
    probs = probs.array().rowwise() / probs.colwise().sum().array();
    const TablePolicy p{probs};
    InteractionLog log;
    StreamingEstimatorState s;
    for (int i = 0; i < 2000; ++i) {
      const auto it = keyed(ctx(rng), act(rng), unif(rng) < 0.5 ? 0.0 : unif(rng), unif(rng));
      log.append(it);
      s.update(it);
    }
    EXPECT_NEAR(estimate_mean_fast(s, p), naive_mean(log, p), 1e-12);
    const auto terms = ips_point_terms(log, p);
    const auto m_fast = s.moments(p);
    const auto m_naive = moments_of(terms);
    EXPECT_NEAR(m_fast.sum_sq, m_naive.sum_sq, 1e-9 * m_naive.sum_sq);
  }
}

TEST(ConfidenceBound, EqualTermsLeaveRangeTerm) {
  const std::vector<double> terms{0.3, 0.3};
  const auto cb = confidence_bound(terms, ConfidenceParams(0.05, 1.0));
  ASSERT_TRUE(cb);
  EXPECT_NEAR(*cb, 7.0 * std::log(40.0) / 3.0, 1e-12);
  EXPECT_NEAR(*cb, 8.6073, 1e-4);
}

TEST(ConfidenceBound, MixedPair) {
  const std::vector<double> terms{0.0, 1.0};
  const auto cb = confidence_bound(terms, ConfidenceParams(0.05, 1.0));
  ASSERT_TRUE(cb);
  EXPECT_NEAR(*cb, 7.0 * std::log(40.0) / 3.0 + 0.5 * std::sqrt(std::log(40.0) * 2.0), 1e-12);
  EXPECT_NEAR(*cb, 9.9656, 1e-3);
}

TEST(ConfidenceBound, UndefinedBelowTwo) {
  const ConfidenceParams params(0.05, 1.0);
  EXPECT_FALSE(confidence_bound(std::vector<double>{}, params));
  EXPECT_FALSE(confidence_bound(std::vector<double>{0.4}, params));
}

TEST(ConfidenceBound, ParamsValidated) {
  EXPECT_THROW(ConfidenceParams(0.0, 1.0), ValidationError);
  EXPECT_THROW(ConfidenceParams(1.0, 1.0), ValidationError);
  EXPECT_THROW(ConfidenceParams(0.05, 0.0), ValidationError);
}

TEST(ConfidenceBound, PairwiseSpreadIdentity) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> terms(2 + trial * 7);
    for (auto& v : terms) v = unif(rng);
    double brute = 0.0;
    for (double a : terms)
      for (double b : terms) brute += (a - b) * (a - b);
    EXPECT_NEAR(pairwise_squared_spread(moments_of(terms)), brute, 1e-9 * std::max(1.0, brute));
  }
}

TEST(ConfidenceBound, ShrinksWithMoreData) {
  const ConfidenceParams params(0.05, 10.0);
  double prev = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> terms;
  for (int t = 1; t <= 4096; ++t) {
    terms.push_back(unif(rng));
    if (t >= 64 && (t & (t - 1)) == 0) {
      const double cb = *confidence_bound(terms, params);
      EXPECT_LT(cb, prev);
      prev = cb;
    }
  }
}

TEST(Evaluate, SingleEntryIsUnbounded) {
  InteractionLog log;
  log.append(keyed(0, 0, 1.0, 0.5));
  const auto ev = evaluate_policy(log, TablePolicy{Matrix::Constant(2, 1, 0.5)}, ConfidenceParams(0.05, 2.0));
  EXPECT_EQ(ev.mean, 1.0);
  EXPECT_EQ(ev.lcb, -std::numeric_limits<double>::infinity());
  EXPECT_EQ(ev.ucb, std::numeric_limits<double>::infinity());
}

TEST(Evaluate, OnPolicyAllOnes) {
  InteractionLog log;
  for (int i = 0; i < 1000; ++i) log.append(keyed(0, 0, 1.0, 1.0));
  Matrix probs(2, 1);
  probs << 1.0, 0.0;
  const ConfidenceParams params(0.05, 1.0);
  const auto ev = evaluate_policy(log, TablePolicy{probs}, params);
  const double cb = 7.0 * std::log(40.0) / (3.0 * 999.0);
  EXPECT_EQ(ev.mean, 1.0);
  EXPECT_NEAR(ev.cb, cb, 1e-15);
  EXPECT_NEAR(ev.lcb, 1.0 - cb, 1e-15);
  EXPECT_NEAR(ev.ucb, 1.0 + cb, 1e-15);
}

TEST(Evaluate, EmptyLogThrows) {
  EXPECT_THROW(evaluate_policy(InteractionLog{}, TablePolicy{Matrix::Ones(1, 1)}, ConfidenceParams{}), ValidationError);
  EXPECT_THROW(bsea_evaluate(InteractionLog{}, TablePolicy{Matrix::Ones(1, 1)}), ValidationError);
}

TEST(Evaluate, BoundlessHasNoWidth) {
  const auto [log, p] = three_entry_example();
  for (std::size_t t = 1; t <= log.size(); ++t) {
    InteractionLog prefix;
    for (std::size_t i = 0; i < t; ++i) prefix.append(log[i]);
    const auto ev = bsea_evaluate(prefix, p);
    EXPECT_EQ(ev.lcb, ev.mean);
    EXPECT_EQ(ev.ucb, ev.mean);
    EXPECT_EQ(ev.cb, 0.0);
  }
}

TEST(Evaluate, FastAndNaiveAgree) {
  const auto [log, p] = three_entry_example();
  StreamingEstimatorState s;
  for (const auto& it : log) s.update(it);
  const ConfidenceParams params(0.1, 4.0);
  const auto a = evaluate_policy(log, p, params);
  const auto b = evaluate_fast(s, p, params);
  EXPECT_NEAR(a.mean, b.mean, 1e-15);
  EXPECT_NEAR(a.cb, b.cb, 1e-12);
  EXPECT_EQ(bsea_evaluate_fast(s, p).lcb, b.mean);
}

TEST(RankingEstimate, NoClicksIsZero) {
  ClickLog log;
  log.append({0, {}});
  const std::vector<Matrix> docs{Matrix::Identity(3, 3)};
  EXPECT_EQ(ranking_ips_estimate(log, docs, LinearRanker(3)), 0.0);
  EXPECT_EQ(ranking_ips_estimate(ClickLog{}, docs, LinearRanker(3)), 0.0);
}

TEST(RankingEstimate, RankWeights) {
  const std::vector<Matrix> docs{Matrix::Identity(3, 3)};
  ClickLog log;
  log.append({0, {{1, 1.0}}});
  EXPECT_DOUBLE_EQ(ranking_ips_estimate(log, docs, LinearRanker(Vector(Vector::Unit(3, 1)))), 1.0);
  // doc 1 at rank 3: scores (1, 0, 0.5) rank doc 0, doc 2, doc 1
  const Vector w = (Vector(3) << 1.0, 0.0, 0.5).finished();
  EXPECT_DOUBLE_EQ(ranking_ips_estimate(log, docs, LinearRanker(w)), 0.5);
  EXPECT_EQ(rank_weight(11), 0.0);
}

TEST(RankingEstimate, PropensityScalesTerm) {
  const std::vector<Matrix> docs{Matrix::Identity(2, 2)};
  ClickLog log;
  log.append({0, {{0, 0.25}}});
  EXPECT_DOUBLE_EQ(ranking_ips_terms(log, docs, LinearRanker(Vector(Vector::Unit(2, 0))))[0], 4.0);
  EXPECT_THROW(log.append({0, {{0, 0.0}}}), ValidationError);
}

TEST(RankingEstimate, RewardBound) {
  double gain = 0.0;
  for (std::size_t k = 1; k <= 10; ++k) gain += 1.0 / std::log2(1.0 + static_cast<double>(k));
  EXPECT_NEAR(ranking_reward_bound(0.1), gain / 0.1, 1e-12);
}

}  // namespace
}  // namespace sea
