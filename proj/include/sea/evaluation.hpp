#pragma once
// Metrics: cumulative reward, regret, held-out reward, nDCG@k and Welch's t-test.

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sea/core_types.hpp"
#include "sea/data_io.hpp"
#include "sea/environments.hpp"
#include "sea/policies.hpp"

namespace sea {

struct MetricSeries {
  std::string metric_name;
  std::vector<std::pair<std::size_t, double>> checkpoints;  // (round t, value), t strictly increasing
};

/// Powers of ten up to `horizon`, plus the horizon itself.
inline std::vector<std::size_t> default_checkpoints(std::size_t horizon) {
  std::vector<std::size_t> out;
  for (std::size_t t = 100; t <= horizon; t *= 10) out.push_back(t);
  if (out.empty() || out.back() != horizon) out.push_back(horizon);
  return out;
}

/// Prefix sums of `rewards` read off at the requested (1-based) rounds.
/// An empty checkpoint list means every round.
inline MetricSeries cumulative_reward(std::span<const double> rewards, std::span<const std::size_t> checkpoints = {}) {
  if (rewards.empty()) throw ValidationError("cumulative reward needs a non-empty trace");
  MetricSeries s{"cumulative_reward", {}};
  double sum = 0.0;
  std::size_t next = 0;
  for (std::size_t t = 1; t <= rewards.size(); ++t) {
    sum += rewards[t - 1];
    if (checkpoints.empty()) {
      s.checkpoints.emplace_back(t, sum);
    } else if (next < checkpoints.size() && checkpoints[next] == t) {
      s.checkpoints.emplace_back(t, sum);
      ++next;
    }
  }
  return s;
}

/// sum_{i<=t} (oracle_i - reward_i).
inline MetricSeries regret(std::span<const double> rewards, std::span<const double> oracle_rewards,
                           std::span<const std::size_t> checkpoints = {}) {
  if (oracle_rewards.size() != rewards.size()) throw ValidationError("oracle rewards unavailable for every round");
  std::vector<double> gaps(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) gaps[i] = oracle_rewards[i] - rewards[i];
  auto s = cumulative_reward(gaps, checkpoints);
  s.metric_name = "regret";
  return s;
}

inline double expected_reward_from_accuracy(double accuracy, const RewardProfile& profile) {
  return profile.expected(false) + (profile.expected(true) - profile.expected(false)) * accuracy;
}

/// Greedy-action accuracy on a held-out set, mapped to expected reward under the
/// profile (0.4 + 0.2 * accuracy for near-random rewards).
template <class Scorer>
  requires requires(const Scorer& s, const Vector& x) { { s.greedy_action(x) } -> std::same_as<ActionId>; }
double average_reward_holdout(const Scorer& policy, const ClassificationData& test, const RewardProfile& profile) {
  if (test.size() == 0) throw ValidationError("held-out set is empty");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Vector x = test.features.row(static_cast<Eigen::Index>(i)).transpose();
    if (policy.greedy_action(x).id == test.labels[i]) ++correct;
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  return expected_reward_from_accuracy(accuracy, profile);
}

/// nDCG@k with gain 2^grade - 1 and discount log2(1 + rank); 0 when the ideal DCG is 0.
inline double ndcg_at_k(const RankedList& ranking, std::span<const int> grades, std::size_t k = 10) {
  auto gain = [](int g) { return std::exp2(static_cast<double>(g)) - 1.0; };
  double dcg = 0.0;
  for (std::size_t pos = 0; pos < std::min(k, ranking.size()); ++pos) {
    dcg += gain(grades[ranking.doc_ids[pos]]) / std::log2(2.0 + static_cast<double>(pos));
  }
  std::vector<int> ideal(grades.begin(), grades.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t pos = 0; pos < std::min(k, ideal.size()); ++pos) {
    idcg += gain(ideal[pos]) / std::log2(2.0 + static_cast<double>(pos));
  }
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

/// Mean nDCG@10 of a ranker over every query of a held-out set.
inline double mean_ndcg(const LinearRanker& ranker, const RankingData& data, std::size_t k = 10) {
  if (data.size() == 0) throw ValidationError("held-out query set is empty");
  double total = 0.0;
  for (std::size_t q = 0; q < data.size(); ++q) total += ndcg_at_k(rank_candidates(ranker, data.docs[q]), data.grades[q], k);
  return total / static_cast<double>(data.size());
}

struct TTestResult {
  double t_statistic = 0.0;
  double p_value = 1.0;
  double dof = 0.0;
};

/// Two-sided Welch t-test. Two constant samples give t = 0, p = 1 when the means agree
/// and p = 0 when they differ.
inline TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("Welch test needs at least two values per sample");
  auto mean_var = [](std::span<const double> s) {
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / static_cast<double>(s.size() - 1)};
  };
  const auto [ma, va] = mean_var(a);
  const auto [mb, vb] = mean_var(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double sa = va / na;
  const double sb = vb / nb;
  TTestResult res;
  if (sa + sb == 0.0) {
    res.p_value = ma == mb ? 1.0 : 0.0;
    res.t_statistic = ma == mb ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
    return res;
  }
  res.t_statistic = (ma - mb) / std::sqrt(sa + sb);
  res.dof = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  const boost::math::students_t dist(res.dof);
  res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(res.t_statistic)));
  return res;
}

}  // namespace sea
