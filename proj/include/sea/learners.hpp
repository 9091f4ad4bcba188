#pragma once
// Weight-update rules.
//
//   ips_sgd_update          w += lr * (r/p) * grad_w pi(a|x)
//   lambda_ips_update       same, with r replaced by r - lambda
//   policy_gradient_update  w += lr * r * grad_w log pi(a|x)
//   ranking_ips_update      per clicked document, (1/p) * grad_w pi(d|q) of a softmax over the candidates
//   ranksvm_pairwise_update skip-above preference pairs, hinge step
//   dbgd_step               dueling bandit gradient descent with team-draft interleaving

#include <cmath>
#include <concepts>
#include <functional>
#include <type_traits>
#include <random>
#include <span>
#include <vector>

#include "sea/core_types.hpp"
#include "sea/estimators.hpp"
#include "sea/policies.hpp"

namespace sea {

struct LearnerConfig {
  double learn_rate = 0.01;
  double lambda_shift = 0.0;
  double dbgd_delta = 1.0;
  double dbgd_gamma = 0.01;
  double ranksvm_margin = 1.0;
  double ranker_radius = 100.0;

  void validate() const {
    if (!(learn_rate > 0.0)) throw ValidationError("learn_rate must be positive");
    if (!(dbgd_delta > 0.0)) throw ValidationError("dbgd_delta must be positive");
    if (!(dbgd_gamma > 0.0)) throw ValidationError("dbgd_gamma must be positive");
  }
};

/// d pi(a|x) / d w_k = pi(a|x) (1[k=a] - pi(k|x)) x / T, returned as the per-row coefficient on x.
inline Vector softmax_prob_gradient_coeffs(const SoftmaxLinearPolicy& policy, const Vector& x, ActionId a) {
  const Vector probs = policy.probabilities(x);
  const double pa = probs[static_cast<Eigen::Index>(a.id)];
  Vector g = -pa * probs;
  g[static_cast<Eigen::Index>(a.id)] += pa;
  return g / policy.temperature;
}

/// d log pi(a|x) / d w_k = (1[k=a] - pi(k|x)) x / T, as per-row coefficients.
inline Vector softmax_log_gradient_coeffs(const SoftmaxLinearPolicy& policy, const Vector& x, ActionId a) {
  Vector g = -policy.probabilities(x);
  g[static_cast<Eigen::Index>(a.id)] += 1.0;
  return g / policy.temperature;
}

namespace detail {

inline void weighted_ips_step(SoftmaxLinearPolicy& policy, const LoggedInteraction& item, double reward,
                              double learn_rate) {
  const double scale = learn_rate * (reward / item.propensity);
  if (scale == 0.0) return;
  const Vector g = softmax_prob_gradient_coeffs(policy, item.context.values, item.action);
  policy.weights.noalias() += (scale * g) * item.context.values.transpose();
}

}  // namespace detail

inline void ips_sgd_step(SoftmaxLinearPolicy& policy, const LoggedInteraction& item, const LearnerConfig& cfg) {
  detail::weighted_ips_step(policy, item, item.reward, cfg.learn_rate);
}

inline void lambda_ips_step(SoftmaxLinearPolicy& policy, const LoggedInteraction& item, const LearnerConfig& cfg) {
  detail::weighted_ips_step(policy, item, item.reward - cfg.lambda_shift, cfg.learn_rate);
}

inline void policy_gradient_step(SoftmaxLinearPolicy& policy, const Vector& x, ActionId a, double r,
                                 const LearnerConfig& cfg) {
  const double scale = cfg.learn_rate * r;
  if (scale == 0.0) return;
  const Vector g = softmax_log_gradient_coeffs(policy, x, a);
  policy.weights.noalias() += (scale * g) * x.transpose();
}

inline SoftmaxLinearPolicy ips_sgd_update(SoftmaxLinearPolicy policy, const LoggedInteraction& item,
                                          const LearnerConfig& cfg) {
  ips_sgd_step(policy, item, cfg);
  return policy;
}

inline SoftmaxLinearPolicy lambda_ips_update(SoftmaxLinearPolicy policy, const LoggedInteraction& item,
                                             const LearnerConfig& cfg) {
  lambda_ips_step(policy, item, cfg);
  return policy;
}

inline SoftmaxLinearPolicy policy_gradient_update(SoftmaxLinearPolicy policy, const ContextVector& x, ActionId a,
                                                  double r, const LearnerConfig& cfg) {
  policy_gradient_step(policy, x.values, a, r, cfg);
  return policy;
}

// ---------------------------------------------------------------------------
// Ranking learners

inline void clip_to_radius(Vector& w, double radius) {
  const double norm = w.norm();
  if (norm > radius) w *= radius / norm;
}

/// Document-level counterfactual step: each clicked doc d (examined with
/// probability p) contributes ((1 - lambda) / p) * grad_w pi(d | q), where pi is a
/// softmax over the query's candidate scores.
inline void ranking_ips_step(LinearRanker& ranker, const Matrix& docs, std::span<const LoggedClick> clicks,
                             const LearnerConfig& cfg) {
  for (const auto& c : clicks) {
    const Vector probs = softmax(docs * ranker.weights);
    const double pd = probs[static_cast<Eigen::Index>(c.doc_id)];
    const Vector mean_doc = docs.transpose() * probs;
    const Vector grad = pd * (docs.row(static_cast<Eigen::Index>(c.doc_id)).transpose() - mean_doc);
    ranker.weights += cfg.learn_rate * ((1.0 - cfg.lambda_shift) / c.propensity) * grad;
  }
  clip_to_radius(ranker.weights, cfg.ranker_radius);
}

/// Skip-above pairs from a displayed list: a clicked doc is preferred over every
/// unclicked doc shown above it within the top 10.
inline std::vector<std::pair<std::size_t, std::size_t>> skip_above_pairs(std::span<const ClickRecord> clicks) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& c : clicks) {
    if (!c.clicked || c.rank > kClickCutoff) continue;
    for (const auto& other : clicks) {
      if (other.rank < c.rank && !other.clicked) pairs.emplace_back(c.doc_id, other.doc_id);
    }
  }
  return pairs;
}

inline LinearRanker ranksvm_pairwise_update(LinearRanker ranker, std::span<const ClickRecord> clicks,
                                            const Matrix& docs, const LearnerConfig& cfg) {
  for (const auto& [pos, neg] : skip_above_pairs(clicks)) {
    const Vector diff = (docs.row(static_cast<Eigen::Index>(pos)) - docs.row(static_cast<Eigen::Index>(neg))).transpose();
    if (ranker.weights.dot(diff) < cfg.ranksvm_margin) ranker.weights += cfg.learn_rate * diff;
  }
  clip_to_radius(ranker.weights, cfg.ranker_radius);
  return ranker;
}

enum class Team : unsigned char { A, B };

struct Interleaving {
  RankedList list;
  std::vector<Team> teams;  // team of the doc at each position
};

/// Team-draft interleaving. Each round `coin()` returns true when team A picks
/// first; each team then appends its highest-ranked doc not yet placed.
template <class Coin>
  requires std::invocable<Coin&> && std::convertible_to<std::invoke_result_t<Coin&>, bool>
Interleaving team_draft_interleave(const RankedList& a, const RankedList& b, Coin&& coin) {
  if (a.size() != b.size()) throw ValidationError("interleaved lists must cover the same candidates");
  const std::size_t n = a.size();
  std::vector<char> placed(n, 0);
  std::size_t next_a = 0;
  std::size_t next_b = 0;
  Interleaving out;
  out.list.doc_ids.reserve(n);
  out.teams.reserve(n);

  auto pick = [&](const RankedList& src, std::size_t& cursor, Team team) {
    while (cursor < n && placed[src.doc_ids[cursor]]) ++cursor;
    if (cursor == n) throw ValidationError("interleaved lists must cover the same candidates");
    const auto doc = src.doc_ids[cursor];
    placed[doc] = 1;
    out.list.doc_ids.push_back(doc);
    out.teams.push_back(team);
  };

  while (out.list.doc_ids.size() < n) {
    const bool a_first = coin();
    if (a_first) {
      pick(a, next_a, Team::A);
      if (out.list.doc_ids.size() < n) pick(b, next_b, Team::B);
    } else {
      pick(b, next_b, Team::B);
      if (out.list.doc_ids.size() < n) pick(a, next_a, Team::A);
    }
  }
  // positional scores keep the list's non-increasing score invariant
  out.list.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.list.scores[i] = static_cast<double>(n - i);
  return out;
}

template <class Rng>
Interleaving team_draft_interleave_rng(const RankedList& a, const RankedList& b, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  return team_draft_interleave(a, b, [&] { return coin(rng); });
}

/// Uniformly random direction on the unit sphere.
template <class Rng>
Vector random_unit_vector(std::size_t m, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector u(static_cast<Eigen::Index>(m));
  do {
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = gauss(rng);
  } while (u.norm() == 0.0);
  u.normalize();
  return u;
}

struct DbgdResult {
  LinearRanker ranker;
  Interleaving shown;
  std::vector<ClickRecord> clicks;
  Vector direction;
  bool candidate_won = false;
};

/// One DBGD round. `user` maps a displayed list to its click records.
template <class Rng>
DbgdResult dbgd_step(LinearRanker ranker, const Matrix& docs,
                     const std::function<std::vector<ClickRecord>(const RankedList&)>& user, Rng& rng,
                     const LearnerConfig& cfg) {
  if (docs.rows() < 2) throw ValidationError("DBGD needs at least two candidates");
  DbgdResult res;
  res.direction = random_unit_vector(static_cast<std::size_t>(ranker.weights.size()), rng);
  const LinearRanker candidate(Vector(ranker.weights + cfg.dbgd_delta * res.direction));
  const auto current_list = rank_candidates(ranker, docs);
  const auto candidate_list = rank_candidates(candidate, docs);
  res.shown = team_draft_interleave_rng(current_list, candidate_list, rng);
  res.clicks = user(res.shown.list);
  std::size_t clicks_a = 0;
  std::size_t clicks_b = 0;
  for (const auto& c : res.clicks) {
    if (!c.clicked) continue;
    (res.shown.teams.at(c.rank - 1) == Team::A ? clicks_a : clicks_b) += 1;
  }
  res.candidate_won = clicks_b > clicks_a;
  if (res.candidate_won) {
    ranker.weights += cfg.dbgd_gamma * res.direction;
    clip_to_radius(ranker.weights, cfg.ranker_radius);
  }
  res.ranker = std::move(ranker);
  return res;
}

}  // namespace sea
