#pragma once
// Off-policy estimates for logged bandit feedback.
//
//   mean   = (1/t) sum_i (r_i / p_i) * pi(a_i | x_i)
//   CB     = 7 b ln(2/delta) / (3 (t-1))
//          + (1/t) sqrt( ln(2/delta) / (t-1) * sum_{i,j} (R_i - R_j)^2 )
//   LCB/UCB = mean -/+ CB
//
// The pairwise sum is evaluated with sum_{i,j}(R_i - R_j)^2 = 2t sum R_i^2 - 2 (sum R_i)^2,
// so every bound only needs t, sum R_i and sum R_i^2. StreamingEstimatorState keeps
// per-(action, context) sums of r/p and (r/p)^2, which makes both moments of any
// policy computable in O(number of distinct logged pairs).

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "sea/core_types.hpp"
#include "sea/policies.hpp"

namespace sea {

struct ConfidenceParams {
  double delta = 0.05;
  double b = 1.0;

  ConfidenceParams() = default;
  ConfidenceParams(double d, double bound) : delta(d), b(bound) { validate(); }

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
    if (!(b > 0.0)) throw ValidationError("reward bound b must be positive");
  }
};

struct PolicyEvaluation {
  double mean = 0.0;
  double cb = 0.0;
  double lcb = 0.0;
  double ucb = 0.0;
  std::size_t t = 0;
};

/// Running moments of the per-interaction estimates R_i.
struct EstimateMoments {
  std::size_t t = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double r) {
    ++t;
    sum += r;
    sum_sq += r * r;
  }
};

template <StochasticPolicy P>
std::vector<double> ips_point_terms(const InteractionLog& log, const P& policy) {
  std::vector<double> terms;
  terms.reserve(log.size());
  for (const auto& item : log) {
    if (!(item.propensity > 0.0)) throw ValidationError("logged propensity must be positive");
    const Vector probs = policy.probabilities(item.context.values);
    terms.push_back(item.weighted_reward() * probs[static_cast<Eigen::Index>(item.action.id)]);
  }
  return terms;
}

inline EstimateMoments moments_of(std::span<const double> terms) {
  EstimateMoments m;
  for (double r : terms) m.add(r);
  return m;
}

/// sum_{i,j} (R_i - R_j)^2 from the first two raw moments; clamped at zero against round-off.
inline double pairwise_squared_spread(const EstimateMoments& m) {
  const double t = static_cast<double>(m.t);
  return std::max(0.0, 2.0 * t * m.sum_sq - 2.0 * m.sum * m.sum);
}

/// Empirical-Bernstein half width. Undefined (nullopt) for t < 2.
inline std::optional<double> confidence_bound(const EstimateMoments& m, const ConfidenceParams& params) {
  params.validate();
  if (m.t < 2) return std::nullopt;
  const double t = static_cast<double>(m.t);
  const double log_term = std::log(2.0 / params.delta);
  const double range_term = 7.0 * params.b * log_term / (3.0 * (t - 1.0));
  const double spread_term = std::sqrt(log_term / (t - 1.0) * pairwise_squared_spread(m)) / t;
  return range_term + spread_term;
}

inline std::optional<double> confidence_bound(std::span<const double> terms, const ConfidenceParams& params) {
  return confidence_bound(moments_of(terms), params);
}

/// Builds the evaluation record; an undefined bound becomes an infinite one.
inline PolicyEvaluation make_evaluation(const EstimateMoments& m, const ConfidenceParams& params) {
  if (m.t == 0) throw ValidationError("cannot evaluate a policy on an empty log");
  PolicyEvaluation ev;
  ev.t = m.t;
  ev.mean = m.sum / static_cast<double>(m.t);
  const auto cb = confidence_bound(m, params);
  if (cb) {
    ev.cb = *cb;
    ev.lcb = ev.mean - ev.cb;
    ev.ucb = ev.mean + ev.cb;
  } else {
    ev.cb = std::numeric_limits<double>::infinity();
    ev.lcb = -std::numeric_limits<double>::infinity();
    ev.ucb = std::numeric_limits<double>::infinity();
  }
  return ev;
}

/// Boundless evaluation: lcb == ucb == mean.
inline PolicyEvaluation make_boundless_evaluation(const EstimateMoments& m) {
  if (m.t == 0) throw ValidationError("cannot evaluate a policy on an empty log");
  PolicyEvaluation ev;
  ev.t = m.t;
  ev.mean = m.sum / static_cast<double>(m.t);
  ev.lcb = ev.ucb = ev.mean;
  return ev;
}

template <StochasticPolicy P>
PolicyEvaluation evaluate_policy(const InteractionLog& log, const P& policy, const ConfidenceParams& params) {
  const auto terms = ips_point_terms(log, policy);
  return make_evaluation(moments_of(terms), params);
}

template <StochasticPolicy P>
PolicyEvaluation bsea_evaluate(const InteractionLog& log, const P& policy) {
  const auto terms = ips_point_terms(log, policy);
  return make_boundless_evaluation(moments_of(terms));
}

/// Aggregate table W[a, x] = sum r/p (plus the matching sum of (r/p)^2), keyed by
/// (action, context dedup key). Only pairs with non-zero reward get an entry.
class StreamingEstimatorState {
 public:
  struct Entry {
    ActionId action;
    std::size_t context_col = 0;
    double weight_sum = 0.0;     // sum of r/p
    double weight_sq_sum = 0.0;  // sum of (r/p)^2
  };

  StreamingEstimatorState() = default;

  void update(const LoggedInteraction& item) {
    validate_interaction(item);
    if (!item.context.dedup_key) throw ValidationError("aggregate table requires contexts with a dedup key");
    ++t_;
    const double w = item.weighted_reward();
    if (w == 0.0) return;
    const std::size_t col = context_column(*item.context.dedup_key, item.context.values);
    const auto key = pair_key(item.action, col);
    auto [it, inserted] = index_.try_emplace(key, entries_.size());
    if (inserted) entries_.push_back(Entry{item.action, col, 0.0, 0.0});
    auto& e = entries_[it->second];
    e.weight_sum += w;
    e.weight_sq_sum += w * w;
  }

  [[nodiscard]] std::size_t t() const { return t_; }
  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
  [[nodiscard]] std::size_t n_contexts() const { return n_contexts_; }
  /// Representative context vectors, one column per distinct key seen in the table.
  [[nodiscard]] auto contexts() const { return contexts_.leftCols(static_cast<Eigen::Index>(n_contexts_)); }

  /// sum of r/p over the whole log.
  [[nodiscard]] double total_weight() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.weight_sum;
    return s;
  }

  template <StochasticPolicy P>
  [[nodiscard]] EstimateMoments moments(const P& policy) const {
    if (entries_.empty()) return EstimateMoments{t_, 0.0, 0.0};
    return moments_from_probabilities(policy.probabilities_batch(contexts()));
  }

  /// Moments given pi(a|x) for every table context (n x n_contexts(), columns in table order).
  [[nodiscard]] EstimateMoments moments_from_probabilities(const Matrix& probs) const {
    EstimateMoments m;
    m.t = t_;
    for (const auto& e : entries_) {
      const double pi = probs(static_cast<Eigen::Index>(e.action.id), static_cast<Eigen::Index>(e.context_col));
      m.sum += pi * e.weight_sum;
      m.sum_sq += pi * pi * e.weight_sq_sum;
    }
    return m;
  }

 private:
  static std::uint64_t pair_key(ActionId a, std::size_t col) {
    return (static_cast<std::uint64_t>(col) << 20U) ^ static_cast<std::uint64_t>(a.id);
  }

  std::size_t context_column(std::int64_t key, const Vector& values) {
    auto [it, inserted] = key_to_col_.try_emplace(key, n_contexts_);
    if (!inserted) return it->second;
    if (contexts_.cols() == 0) {
      contexts_.resize(values.size(), 64);
    } else if (static_cast<Eigen::Index>(n_contexts_) == contexts_.cols()) {
      contexts_.conservativeResize(Eigen::NoChange, contexts_.cols() * 2);
    }
    if (values.size() != contexts_.rows()) throw ValidationError("context dimension changed within a log");
    contexts_.col(static_cast<Eigen::Index>(n_contexts_)) = values;
    return n_contexts_++;
  }

  std::size_t t_ = 0;
  std::size_t n_contexts_ = 0;
  Matrix contexts_;
  std::unordered_map<std::int64_t, std::size_t> key_to_col_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<Entry> entries_;
};

inline StreamingEstimatorState aggregate_update(StreamingEstimatorState state, const LoggedInteraction& item) {
  state.update(item);
  return state;
}

template <StochasticPolicy P>
double estimate_mean_fast(const StreamingEstimatorState& state, const P& policy) {
  if (state.t() == 0) throw ValidationError("cannot estimate a mean from an empty table");
  const auto m = state.moments(policy);
  return m.sum / static_cast<double>(m.t);
}

template <StochasticPolicy P>
PolicyEvaluation evaluate_fast(const StreamingEstimatorState& state, const P& policy, const ConfidenceParams& params) {
  return make_evaluation(state.moments(policy), params);
}

template <StochasticPolicy P>
PolicyEvaluation bsea_evaluate_fast(const StreamingEstimatorState& state, const P& policy) {
  return make_boundless_evaluation(state.moments(policy));
}

// ---------------------------------------------------------------------------
// Document-level IPS for rankings.

/// DCG@10 rank weight: 1/log2(1+k) for k <= 10, else 0.
inline double rank_weight(std::size_t rank) {
  if (rank == 0 || rank > kClickCutoff) return 0.0;
  return 1.0 / std::log2(1.0 + static_cast<double>(rank));
}

struct RankingRound {
  std::size_t query = 0;
  std::vector<LoggedClick> clicks;
};

class ClickLog {
 public:
  void append(RankingRound round) {
    for (const auto& c : round.clicks) {
      if (!(c.propensity >= kMinPropensity && c.propensity <= 1.0)) {
        throw ValidationError("click propensity must lie in (0, 1]");
      }
    }
    rounds_.push_back(std::move(round));
  }
  [[nodiscard]] std::size_t size() const { return rounds_.size(); }
  [[nodiscard]] bool empty() const { return rounds_.empty(); }
  [[nodiscard]] const std::vector<RankingRound>& rounds() const { return rounds_; }

 private:
  std::vector<RankingRound> rounds_;
};

/// Largest value a per-round ranking term can take: every top-10 slot clicked at
/// the smallest examination propensity.
inline double ranking_reward_bound(double min_propensity) {
  double max_gain = 0.0;
  for (std::size_t k = 1; k <= kClickCutoff; ++k) max_gain += rank_weight(k);
  return reward_bound_b(max_gain, min_propensity);
}

/// Per-round terms sum_{clicked d} rank_weight(rank of d under `ranker`) / p_d.
inline std::vector<double> ranking_ips_terms(const ClickLog& log, std::span<const Matrix> query_docs,
                                             const LinearRanker& ranker) {
  std::unordered_map<std::size_t, std::vector<std::size_t>> ranks;
  std::vector<double> terms;
  terms.reserve(log.size());
  for (const auto& round : log.rounds()) {
    double term = 0.0;
    if (!round.clicks.empty()) {
      auto it = ranks.find(round.query);
      if (it == ranks.end()) {
        it = ranks.emplace(round.query, rank_candidates(ranker, query_docs[round.query]).ranks()).first;
      }
      for (const auto& c : round.clicks) {
        if (!(c.propensity > 0.0)) throw ValidationError("click propensity must be positive");
        term += rank_weight(it->second.at(c.doc_id)) / c.propensity;
      }
    }
    terms.push_back(term);
  }
  return terms;
}

inline double ranking_ips_estimate(const ClickLog& log, std::span<const Matrix> query_docs,
                                   const LinearRanker& ranker) {
  if (log.empty()) return 0.0;
  const auto terms = ranking_ips_terms(log, query_docs, ranker);
  return moments_of(terms).sum / static_cast<double>(terms.size());
}

}  // namespace sea
