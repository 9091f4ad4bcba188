#pragma once
// Oracle cross-checks grouped into named suites. Each check reports what it
// measured, the tolerance it was held to, and whether it passed. The suites back
// both the `verify` subcommand and the acceptance binary.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sea/core_types.hpp"
#include "sea/data_io.hpp"
#include "sea/environments.hpp"
#include "sea/estimators.hpp"
#include "sea/evaluation.hpp"
#include "sea/experiment.hpp"
#include "sea/learners.hpp"
#include "sea/policies.hpp"
#include "sea/safe_deploy.hpp"

namespace sea::verify {

struct Check {
  std::string name;
  double observed = 0.0;
  double tolerance = 0.0;
  std::string comparison;  // how observed is held to tolerance, e.g. "<=" or ">="
  bool passed = false;
  std::string detail;
};

/// observed <= tolerance
inline Check at_most(std::string name, double observed, double tolerance, std::string detail = {}) {
  return {std::move(name), observed, tolerance, "<=", observed <= tolerance, std::move(detail)};
}

/// observed >= threshold
inline Check at_least(std::string name, double observed, double threshold, std::string detail = {}) {
  return {std::move(name), observed, threshold, ">=", observed >= threshold, std::move(detail)};
}

struct SuiteReport {
  std::string suite;
  std::vector<Check> checks;
  double seconds = 0.0;

  [[nodiscard]] bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
};

inline nlohmann::json to_json(const SuiteReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    nlohmann::json j{{"name", c.name},
                     {"comparison", c.comparison},
                     {"tolerance", c.tolerance},
                     {"passed", c.passed}};
    // JSON has no infinities or NaN; report those as strings
    if (std::isfinite(c.observed)) j["observed"] = c.observed;
    else j["observed"] = format_number(c.observed);
    if (!c.detail.empty()) j["detail"] = c.detail;
    checks.push_back(std::move(j));
  }
  return {{"suite", r.suite}, {"passed", r.passed()}, {"seconds", r.seconds}, {"checks", checks}};
}

/// Sizes of the randomized checks. The defaults are the full acceptance sizes;
/// quick() shrinks the expensive ones for interactive use.
struct Options {
  std::uint64_t seed = 20240601;
  std::size_t equivalence_logs = 100;
  std::size_t equivalence_rounds = 10000;
  std::size_t coverage_trials = 1000;
  std::size_t safety_seeds = 10;
  std::size_t safety_horizon = 50000;

  static Options quick() {
    Options o;
    o.equivalence_logs = 20;
    o.coverage_trials = 200;
    o.safety_seeds = 2;
    o.safety_horizon = 20000;
    return o;
  }
};

// ---------------------------------------------------------------------------
// Estimators

struct RandomLogSpec {
  std::size_t n_actions = 10;
  std::size_t n_contexts = 50;
  std::size_t dim = 5;
  std::size_t rounds = 10000;
};

struct RandomLog {
  std::vector<ContextVector> contexts;
  InteractionLog log;
};

/// Log from a random softmax logging policy over a finite context set.
template <class Rng>
RandomLog make_random_log(const RandomLogSpec& spec, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  RandomLog out;
  for (std::size_t c = 0; c < spec.n_contexts; ++c) {
    Vector x(static_cast<Eigen::Index>(spec.dim));
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = gauss(rng);
    out.contexts.emplace_back(x, static_cast<std::int64_t>(c));
  }
  const SoftmaxLinearPolicy logger(Matrix::NullaryExpr(static_cast<Eigen::Index>(spec.n_actions),
                                                       static_cast<Eigen::Index>(spec.dim), [&] { return gauss(rng); }));
  std::uniform_int_distribution<std::size_t> pick(0, spec.n_contexts - 1);
  for (std::size_t t = 0; t < spec.rounds; ++t) {
    const auto& x = out.contexts[pick(rng)];
    const auto [a, p] = sample_action(logger, x, rng);
    const double r = unif(rng) < 0.5 ? 0.0 : unif(rng);
    out.log.append({x, a, r, std::max(p, kMinPropensity)});
  }
  return out;
}

/// Largest |fast mean - naive mean| over random logs and random target policies.
inline Check check_estimator_equivalence(const Options& opt) {
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  RandomLogSpec spec;
  spec.rounds = opt.equivalence_rounds;
  double worst = 0.0;
  for (std::size_t k = 0; k < opt.equivalence_logs; ++k) {
    const auto data = make_random_log(spec, rng);
    const SoftmaxLinearPolicy target(Matrix::NullaryExpr(static_cast<Eigen::Index>(spec.n_actions),
                                                         static_cast<Eigen::Index>(spec.dim), [&] { return gauss(rng); }));
    StreamingEstimatorState state;
    for (const auto& item : data.log) state.update(item);
    const auto terms = ips_point_terms(data.log, target);
    const double naive = std::accumulate(terms.begin(), terms.end(), 0.0) / static_cast<double>(terms.size());
    worst = std::max(worst, std::abs(estimate_mean_fast(state, target) - naive));
  }
  return at_most("fast_vs_naive_mean_max_abs_diff", worst, 1e-9,
                 std::to_string(opt.equivalence_logs) + " logs, t=" + std::to_string(spec.rounds));
}

/// Largest relative gap between the brute-force pairwise sum and the moment identity.
inline Check check_variance_identity(const Options& opt, std::size_t vectors = 50, std::size_t max_t = 2000) {
  std::mt19937_64 rng(opt.seed + 1);
  std::uniform_int_distribution<std::size_t> length(2, max_t);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  double worst = 0.0;
  for (std::size_t k = 0; k < vectors; ++k) {
    const std::size_t t = k == 0 ? max_t : length(rng);
    std::vector<double> terms(t);
    for (auto& v : terms) v = unif(rng);
    double brute = 0.0;
    for (double a : terms)
      for (double b : terms) brute += (a - b) * (a - b);
    const double identity = pairwise_squared_spread(moments_of(terms));
    worst = std::max(worst, std::abs(brute - identity) / std::max(std::abs(brute), 1e-300));
  }
  return at_most("pairwise_spread_identity_max_rel_err", worst, 1e-6);
}

inline SuiteReport suite_estimators(const Options& opt) {
  SuiteReport r{"estimators", {}, 0.0};
  r.checks.push_back(check_estimator_equivalence(opt));
  r.checks.push_back(check_variance_identity(opt));
  // the three-entry hand example: (r/p, pi) = (2, .5), (4, .25), (1, 1)
  const std::vector<double> terms{2.0 * 0.5, 4.0 * 0.25, 1.0 * 1.0};
  r.checks.push_back(at_most("hand_example_mean_abs_err", std::abs(moments_of(terms).sum / 3.0 - 1.0), 1e-12));
  return r;
}

// ---------------------------------------------------------------------------
// Bounds

inline std::vector<Check> bound_arithmetic_checks() {
  const ConfidenceParams params(0.05, 1.0);
  const double first = 7.0 * std::log(40.0) / 3.0;
  const std::vector<double> equal{0.3, 0.3};
  const std::vector<double> mixed{0.0, 1.0};
  const std::vector<double> single{0.5};
  const double cb_equal = confidence_bound(equal, params).value_or(std::nan(""));
  const double cb_mixed = confidence_bound(mixed, params).value_or(std::nan(""));
  std::vector<Check> out;
  out.push_back(at_most("equal_terms_cb_abs_err", std::abs(cb_equal - first), 1e-9, "expects 7 ln(40) / 3"));
  out.push_back(at_most("mixed_terms_cb_abs_err", std::abs(cb_mixed - 9.9656), 1e-3, "expects 9.9656"));
  out.push_back(at_most("mixed_terms_cb_exact_abs_err",
                        std::abs(cb_mixed - (first + 0.5 * std::sqrt(std::log(40.0) * 2.0))), 1e-12));
  const bool undefined = !confidence_bound(single, params).has_value();
  out.push_back(at_least("t1_bound_undefined", undefined ? 1.0 : 0.0, 1.0));
  const auto ev = make_evaluation(moments_of(single), params);
  out.push_back(at_least("t1_lcb_is_minus_inf", std::isinf(ev.lcb) && ev.lcb < 0 ? 1.0 : 0.0, 1.0));
  return out;
}

inline SuiteReport suite_bounds(const Options&) {
  SuiteReport r{"bounds", bound_arithmetic_checks(), 0.0};
  return r;
}

// ---------------------------------------------------------------------------
// Coverage: a finite environment where every policy value is known exactly.

struct FiniteEnv {
  std::vector<Vector> contexts;  // drawn uniformly
  Matrix mean_reward;            // n_actions x n_contexts, Bernoulli means
};

template <class Rng>
FiniteEnv make_finite_env(std::size_t n_actions, std::size_t n_contexts, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  FiniteEnv env;
  for (std::size_t c = 0; c < n_contexts; ++c) {
    Vector x(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = gauss(rng);
    env.contexts.push_back(x);
  }
  env.mean_reward = Matrix::NullaryExpr(static_cast<Eigen::Index>(n_actions), static_cast<Eigen::Index>(n_contexts),
                                        [&] { return unif(rng); });
  return env;
}

template <StochasticPolicy P>
double finite_true_value(const FiniteEnv& env, const P& policy) {
  double v = 0.0;
  for (std::size_t c = 0; c < env.contexts.size(); ++c) {
    v += policy.probabilities(env.contexts[c]).dot(env.mean_reward.col(static_cast<Eigen::Index>(c)));
  }
  return v / static_cast<double>(env.contexts.size());
}

/// Fraction of trials whose [LCB, UCB] holds the exact value of a target policy,
/// evaluated on a log collected by a different epsilon-greedy policy.
inline Check check_coverage(const Options& opt, std::size_t rounds = 500, double delta = 0.05) {
  std::mt19937_64 rng(opt.seed + 2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  constexpr std::size_t n = 4;
  constexpr std::size_t dim = 3;
  std::size_t covered = 0;
  for (std::size_t trial = 0; trial < opt.coverage_trials; ++trial) {
    const auto env = make_finite_env(n, 6, dim, rng);
    const EpsilonGreedyPolicy logger(Matrix::NullaryExpr(n, dim, [&] { return gauss(rng); }), 0.5);
    const SoftmaxLinearPolicy target(Matrix::NullaryExpr(n, dim, [&] { return gauss(rng); }));
    const double truth = finite_true_value(env, target);
    const ConfidenceParams params(delta, reward_bound_b(1.0, logger.min_propensity()));
    InteractionLog log;
    std::uniform_int_distribution<std::size_t> pick(0, env.contexts.size() - 1);
    for (std::size_t t = 0; t < rounds; ++t) {
      const auto c = pick(rng);
      const ContextVector x(env.contexts[c], static_cast<std::int64_t>(c));
      const auto [a, p] = sample_action(logger, x, rng);
      const double r = unif(rng) < env.mean_reward(static_cast<Eigen::Index>(a.id), static_cast<Eigen::Index>(c)) ? 1.0 : 0.0;
      log.append({x, a, r, p});
    }
    const auto ev = evaluate_policy(log, target, params);
    if (ev.lcb <= truth && truth <= ev.ucb) ++covered;
  }
  const double rate = static_cast<double>(covered) / static_cast<double>(opt.coverage_trials);
  return at_least("coverage_rate", rate, 1.0 - delta, std::to_string(opt.coverage_trials) + " trials");
}

inline SuiteReport suite_coverage(const Options& opt) { return {"coverage", {check_coverage(opt)}, 0.0}; }

// ---------------------------------------------------------------------------
// Gradients: compare each update's step direction with central differences.

namespace detail {

/// Central-difference gradient of f with respect to every entry of w.
inline Matrix numeric_gradient(const Matrix& w, const std::function<double(const Matrix&)>& f, double h = 1e-5) {
  Matrix g(w.rows(), w.cols());
  Matrix probe = w;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      probe(i, j) = w(i, j) + h;
      const double up = f(probe);
      probe(i, j) = w(i, j) - h;
      const double down = f(probe);
      probe(i, j) = w(i, j);
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

inline double relative_error(const Matrix& analytic, const Matrix& numeric) {
  return (analytic - numeric).norm() / std::max(numeric.norm(), 1e-8);
}

}  // namespace detail

/// Worst relative error of ips_sgd_update, lambda_ips_update and
/// policy_gradient_update step directions against finite differences.
inline std::vector<Check> gradient_checks(const Options& opt, std::size_t instances = 100) {
  std::mt19937_64 rng(opt.seed + 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  double worst_ips = 0.0;
  double worst_lambda = 0.0;
  double worst_pg = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(k % 5);
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(k % 4);
    SoftmaxLinearPolicy policy(Matrix::NullaryExpr(n, m, [&] { return gauss(rng); }), 0.5 + unif(rng));
    const Vector x = Vector::NullaryExpr(m, [&] { return gauss(rng); });
    const ActionId a(static_cast<std::size_t>(k) % static_cast<std::size_t>(n));
    const double r = unif(rng);
    const double p = unif(rng);
    LearnerConfig cfg;
    cfg.learn_rate = 0.1;
    cfg.lambda_shift = 0.3;
    const LoggedInteraction item{ContextVector(x), a, r, p};

    auto prob = [&](const Matrix& w) {
      SoftmaxLinearPolicy q(w, policy.temperature);
      return q.probabilities(x)[static_cast<Eigen::Index>(a.id)];
    };
    const Matrix grad_pi = detail::numeric_gradient(policy.weights, prob);
    const Matrix grad_log = detail::numeric_gradient(policy.weights, [&](const Matrix& w) { return std::log(prob(w)); });

    const Matrix step_ips = (ips_sgd_update(policy, item, cfg).weights - policy.weights) / (cfg.learn_rate * r / p);
    const Matrix step_lambda =
        (lambda_ips_update(policy, item, cfg).weights - policy.weights) / (cfg.learn_rate * (r - cfg.lambda_shift) / p);
    const Matrix step_pg =
        (policy_gradient_update(policy, ContextVector(x), a, r, cfg).weights - policy.weights) / (cfg.learn_rate * r);
    worst_ips = std::max(worst_ips, detail::relative_error(step_ips, grad_pi));
    worst_lambda = std::max(worst_lambda, detail::relative_error(step_lambda, grad_pi));
    worst_pg = std::max(worst_pg, detail::relative_error(step_pg, grad_log));
  }
  return {at_most("ips_sgd_max_rel_err", worst_ips, 1e-5), at_most("lambda_ips_max_rel_err", worst_lambda, 1e-5),
          at_most("policy_gradient_max_rel_err", worst_pg, 1e-5)};
}

inline SuiteReport suite_gradients(const Options& opt) { return {"gradients", gradient_checks(opt), 0.0}; }

// ---------------------------------------------------------------------------
// Interleaving

struct InterleavingAudit {
  std::size_t cases = 0;
  std::size_t failures = 0;
};

/// Every coin sequence for many list pairs of each length 1..max_docs: the output
/// must be a permutation whose team sizes differ by at most one.
inline InterleavingAudit audit_interleaving(std::uint64_t seed, std::size_t max_docs = 10, std::size_t pairs_per_length = 40) {
  std::mt19937_64 rng(seed);
  InterleavingAudit audit;
  for (std::size_t n = 1; n <= max_docs; ++n) {
    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> pairs;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    if (n <= 4) {
      // every ordered pair of permutations
      std::vector<std::vector<std::size_t>> all;
      do all.push_back(perm); while (std::next_permutation(perm.begin(), perm.end()));
      for (const auto& a : all)
        for (const auto& b : all) pairs.emplace_back(a, b);
    } else {
      for (std::size_t k = 0; k < pairs_per_length; ++k) {
        auto a = perm;
        auto b = perm;
        std::shuffle(a.begin(), a.end(), rng);
        std::shuffle(b.begin(), b.end(), rng);
        pairs.emplace_back(std::move(a), std::move(b));
      }
    }
    const std::size_t rounds = (n + 1) / 2;
    for (const auto& [a_ids, b_ids] : pairs) {
      RankedList a{a_ids, std::vector<double>(n, 0.0)};
      RankedList b{b_ids, std::vector<double>(n, 0.0)};
      for (std::size_t bits = 0; bits < (std::size_t{1} << rounds); ++bits) {
        std::size_t round = 0;
        const auto out = team_draft_interleave(a, b, [&] { return ((bits >> (round++ % rounds)) & 1U) != 0; });
        const auto team_a = static_cast<long>(std::count(out.teams.begin(), out.teams.end(), Team::A));
        const auto team_b = static_cast<long>(out.teams.size()) - team_a;
        const bool ok = out.list.size() == n && is_valid_ranked_list(out.list) && std::abs(team_a - team_b) <= 1;
        ++audit.cases;
        if (!ok) ++audit.failures;
      }
    }
  }
  return audit;
}

inline SuiteReport suite_interleaving(const Options& opt) {
  const auto audit = audit_interleaving(opt.seed + 4);
  return {"interleaving",
          {at_most("interleaving_failures", static_cast<double>(audit.failures), 0.0,
                   std::to_string(audit.cases) + " coin sequences x list pairs")},
          0.0};
}

// ---------------------------------------------------------------------------
// Environments

inline std::vector<Check> environment_constant_checks() {
  std::vector<Check> out;
  auto exact = [&](const std::string& name, double got, double want) {
    out.push_back(at_most(name, std::abs(got - want), 0.0));
  };
  const std::array<double, 5> perfect{0.0, 0.2, 0.4, 0.8, 1.0};
  const std::array<double, 5> biased{0.1, 0.1, 0.1, 1.0, 1.0};
  const std::array<double, 5> random{0.4, 0.45, 0.5, 0.55, 0.6};
  for (std::size_t g = 0; g < 5; ++g) {
    exact("perfect_click_grade" + std::to_string(g), ClickProfile::perfect().probs[g], perfect[g]);
    exact("position_biased_click_grade" + std::to_string(g), ClickProfile::position_biased().probs[g], biased[g]);
    exact("near_random_click_grade" + std::to_string(g), ClickProfile::near_random().probs[g], random[g]);
  }
  exact("near_random_reward_correct", RewardProfile::near_random().expected(true), 0.6);
  exact("near_random_reward_incorrect", RewardProfile::near_random().expected(false), 0.4);
  const ExaminationModel model{1.0, kClickCutoff};
  for (std::size_t k = 1; k <= 12; ++k) {
    exact("examination_rank" + std::to_string(k), examination_probability(model, k),
          k <= 10 ? 1.0 / static_cast<double>(k) : 0.0);
  }
  return out;
}

/// Monte Carlo click, examination and reward rates, each held to 3 standard errors.
inline std::vector<Check> environment_monte_carlo_checks(std::uint64_t seed, std::size_t samples = 100000) {
  std::mt19937_64 rng(seed);
  std::vector<Check> out;
  auto within = [&](const std::string& name, std::size_t hits, double p) {
    const double rate = static_cast<double>(hits) / static_cast<double>(samples);
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
    const double z = sigma > 0.0 ? std::abs(rate - p) / sigma : (rate == p ? 0.0 : INFINITY);
    out.push_back(at_most(name + "_zscore", z, 3.0, "rate " + format_number(rate) + " vs " + format_number(p)));
  };
  const ExaminationModel model{1.0, kClickCutoff};
  RankedList list;
  for (std::size_t d = 0; d < 12; ++d) {
    list.doc_ids.push_back(d);
    list.scores.push_back(static_cast<double>(12 - d));
  }
  for (const auto& profile : {ClickProfile::perfect(), ClickProfile::position_biased(), ClickProfile::near_random()}) {
    for (int g = 0; g < 5; ++g) {
      const std::vector<int> grades(12, g);
      std::size_t top_clicks = 0;
      std::size_t rank3_clicks = 0;
      std::size_t beyond = 0;
      std::array<std::size_t, 10> examined{};
      for (std::size_t s = 0; s < samples; ++s) {
        const auto recs = simulate_clicks(list, grades, model, profile, rng);
        top_clicks += recs[0].clicked ? 1 : 0;
        rank3_clicks += recs[2].clicked ? 1 : 0;
        beyond += (recs[10].examined || recs[11].examined) ? 1 : 0;
        for (std::size_t k = 0; k < 10; ++k) examined[k] += recs[k].examined ? 1 : 0;
      }
      const auto tag = profile.name + "_grade" + std::to_string(g);
      within(tag + "_click_rank1", top_clicks, profile.probs[static_cast<std::size_t>(g)]);
      within(tag + "_click_rank3", rank3_clicks, profile.probs[static_cast<std::size_t>(g)] / 3.0);
      out.push_back(at_most(tag + "_examined_beyond_cutoff", static_cast<double>(beyond), 0.0));
      if (profile.name == "perfect" && g == 0) {
        for (std::size_t k = 0; k < 10; ++k) {
          within("examination_rank" + std::to_string(k + 1), examined[k], 1.0 / static_cast<double>(k + 1));
        }
      }
    }
  }
  const auto near = RewardProfile::near_random();
  std::size_t correct_hits = 0;
  std::size_t wrong_hits = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    correct_hits += classification_reward(ActionId(1), ActionId(1), near, rng) > 0.5 ? 1 : 0;
    wrong_hits += classification_reward(ActionId(0), ActionId(1), near, rng) > 0.5 ? 1 : 0;
  }
  within("near_random_reward_correct_rate", correct_hits, 0.6);
  within("near_random_reward_incorrect_rate", wrong_hits, 0.4);
  return out;
}

inline SuiteReport suite_environments(const Options& opt) {
  SuiteReport r{"environments", environment_constant_checks(), 0.0};
  auto mc = environment_monte_carlo_checks(opt.seed + 5);
  r.checks.insert(r.checks.end(), mc.begin(), mc.end());
  return r;
}

// ---------------------------------------------------------------------------
// nDCG

inline RankedList list_of(std::vector<std::size_t> ids) {
  RankedList l;
  l.doc_ids = std::move(ids);
  for (std::size_t i = 0; i < l.doc_ids.size(); ++i) l.scores.push_back(static_cast<double>(l.doc_ids.size() - i));
  return l;
}

struct NdcgAudit {
  std::size_t orderings = 0;
  std::size_t out_of_range = 0;
  std::size_t monotonicity_violations = 0;
};

/// Every ordering of random graded lists of 1..5 docs: nDCG stays in [0, 1] and
/// swapping an adjacent-or-not pair into grade order never lowers it.
inline NdcgAudit audit_ndcg(std::uint64_t seed, std::size_t lists_per_length = 30) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> grade(0, 4);
  NdcgAudit audit;
  for (std::size_t n = 1; n <= 5; ++n) {
    for (std::size_t k = 0; k < lists_per_length; ++k) {
      std::vector<int> grades(n);
      for (auto& g : grades) g = grade(rng);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      do {
        const double base = ndcg_at_k(list_of(perm), grades);
        ++audit.orderings;
        if (base < 0.0 || base > 1.0 + 1e-12) ++audit.out_of_range;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) {
            if (grades[perm[i]] >= grades[perm[j]]) continue;
            auto swapped = perm;
            std::swap(swapped[i], swapped[j]);
            if (ndcg_at_k(list_of(swapped), grades) < base - 1e-12) ++audit.monotonicity_violations;
          }
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }
  return audit;
}

inline std::vector<Check> ndcg_checks(std::uint64_t seed) {
  std::vector<Check> out;
  const std::vector<int> grades{3, 1, 0, 2};
  out.push_back(at_most("ideal_ordering_abs_err", std::abs(ndcg_at_k(list_of({0, 3, 1, 2}), grades) - 1.0), 0.0));
  // doc 0 has grade 3 and doc 1 grade 0; showing doc 1 first gives 1 / log2(3)
  const std::vector<int> two{3, 0};
  out.push_back(at_most("two_doc_hand_case_abs_err", std::abs(ndcg_at_k(list_of({1, 0}), two) - 1.0 / std::log2(3.0)), 1e-12));
  const std::vector<int> zeros{0, 0, 0};
  out.push_back(at_most("all_zero_grades", std::abs(ndcg_at_k(list_of({2, 0, 1}), zeros)), 0.0));
  const auto audit = audit_ndcg(seed);
  out.push_back(at_most("ndcg_out_of_unit_interval", static_cast<double>(audit.out_of_range), 0.0,
                        std::to_string(audit.orderings) + " orderings"));
  out.push_back(at_most("ndcg_monotonicity_violations", static_cast<double>(audit.monotonicity_violations), 0.0));
  return out;
}

inline SuiteReport suite_ndcg(const Options& opt) { return {"ndcg", ndcg_checks(opt.seed + 6), 0.0}; }

// ---------------------------------------------------------------------------
// Safety: audit every deployment of seeded SEA runs against exact policy values.

struct SafetyRun {
  std::string profile;
  std::uint64_t seed = 0;
  std::vector<std::size_t> deployments;
  std::vector<std::pair<double, double>> values;  // (replaced, new) exact expected reward per deployment
  std::size_t violations = 0;
  std::size_t boundless_disagreements = 0;  // deployments where the mean-based check would have said no
};

/// One SEA run on the synthetic classification task, with the same seed
/// derivation as the experiment runner.
inline SafetyRun audit_sea_run(const std::shared_ptr<const ClassificationData>& pool, const std::string& profile_name,
                               std::uint64_t seed, std::size_t horizon, double baseline_fraction = 0.01) {
  const auto profile = reward_profile_by_name(profile_name);
  const auto streams = derive_streams(seed);
  SupervisedConfig sup;
  std::mt19937_64 baseline_rng(streams.baseline);
  const auto baseline = make_baseline(*pool, baseline_fraction, sup, baseline_rng);
  SeaConfig cfg;
  cfg.keep_log = false;
  SeaState state(baseline, cfg);
  ClassificationEnv env(pool, profile, streams.environment);
  std::mt19937_64 policy_rng(streams.policy);
  SafetyRun run{profile_name, seed, {}, {}, 0, 0};
  double current = true_policy_value(state.deployed(), *pool, profile);
  for (std::size_t t = 1; t <= horizon; ++t) {
    const auto res = sea_round(state, env, policy_rng);
    if (!res.deployed_now) continue;
    const double next = true_policy_value(state.deployed(), *pool, profile);
    run.deployments.push_back(t);
    run.values.emplace_back(current, next);
    if (next < current) ++run.violations;
    if (!(res.learned.mean >= res.deployed.mean)) ++run.boundless_disagreements;
    current = next;
  }
  return run;
}

inline std::shared_ptr<const ClassificationData> synthetic_pool(std::uint64_t data_seed = ExperimentConfig{}.data_seed) {
  ExperimentConfig cfg;
  cfg.data_seed = data_seed;
  return load_classification(cfg).pool;
}

inline std::vector<SafetyRun> audit_safety(std::size_t seeds, std::size_t horizon) {
  const auto pool = synthetic_pool();
  std::vector<SafetyRun> runs;
  for (const std::string profile : {"perfect", "near-random"}) {
    for (std::uint64_t s = 0; s < seeds; ++s) runs.push_back(audit_sea_run(pool, profile, s, horizon));
  }
  return runs;
}

inline SuiteReport suite_safety(const Options& opt) {
  const auto runs = audit_safety(opt.safety_seeds, opt.safety_horizon);
  std::size_t deployments = 0;
  std::size_t violations = 0;
  for (const auto& r : runs) {
    deployments += r.deployments.size();
    violations += r.violations;
  }
  return {"safety",
          {at_most("unsafe_deployments", static_cast<double>(violations), 0.0,
                   std::to_string(runs.size()) + " runs, T=" + std::to_string(opt.safety_horizon) + ", " +
                       std::to_string(deployments) + " deployments")},
          0.0};
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"estimators", "bounds", "coverage",    "gradients",
                                              "interleaving", "environments", "ndcg", "safety"};
  return names;
}

/// Runs a named suite; unknown names throw ValidationError listing the available ones.
inline SuiteReport run_suite(std::string_view name, const Options& opt = {}) {
  static const std::map<std::string, std::function<SuiteReport(const Options&)>, std::less<>> suites{
      {"estimators", suite_estimators},     {"bounds", suite_bounds},       {"coverage", suite_coverage},
      {"gradients", suite_gradients},       {"interleaving", suite_interleaving},
      {"environments", suite_environments}, {"ndcg", suite_ndcg},           {"safety", suite_safety}};
  const auto it = suites.find(name);
  if (it == suites.end()) {
    std::string list;
    for (const auto& n : suite_names()) list += (list.empty() ? "" : ", ") + n;
    throw ValidationError("unknown suite '" + std::string(name) + "'; available: " + list);
  }
  const auto start = std::chrono::steady_clock::now();
  auto report = it->second(opt);
  report.suite = std::string(name);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace sea::verify
