#pragma once
// Decision policies: softmax-linear (Boltzmann), epsilon-greedy, a uniform
// exploration floor, LinUCB, linear Thompson sampling, and the linear ranker.

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include <cmath>
#include <concepts>
#include <random>
#include <string>
#include <vector>

#include "sea/core_types.hpp"

namespace sea {

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax_lowest(const Vector& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
  }
  return best;
}

/// Numerically stable softmax (max-subtracted).
inline Vector softmax(const Vector& logits) {
  const double shift = logits.maxCoeff();
  Vector p = (logits.array() - shift).exp().matrix();
  p /= p.sum();
  return p;
}

/// Column-wise softmax of an n x K logit matrix.
inline Matrix softmax_columns(Matrix logits) {
  const Eigen::RowVectorXd shift = logits.colwise().maxCoeff();
  logits.rowwise() -= shift;
  logits = logits.array().exp().matrix();
  const Eigen::RowVectorXd norm = logits.colwise().sum();
  logits.array().rowwise() /= norm.array();
  return logits;
}

/// A policy that assigns a probability to each of n actions given a context.
template <class P>
concept StochasticPolicy = requires(const P& p, const Vector& x, const Matrix& xs) {
  { p.n_actions() } -> std::convertible_to<std::size_t>;
  { p.probabilities(x) } -> std::convertible_to<Vector>;
  { p.probabilities_batch(xs) } -> std::convertible_to<Matrix>;
};

/// pi(a|x) proportional to exp(w_a . x / temperature).
struct SoftmaxLinearPolicy {
  Matrix weights;  // n x m, one row per action
  double temperature = 1.0;

  SoftmaxLinearPolicy() = default;
  SoftmaxLinearPolicy(std::size_t n, std::size_t m, double temp = 1.0)
      : weights(Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m))), temperature(temp) {}
  explicit SoftmaxLinearPolicy(Matrix w, double temp = 1.0) : weights(std::move(w)), temperature(temp) {}

  [[nodiscard]] std::size_t n_actions() const { return static_cast<std::size_t>(weights.rows()); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(weights.cols()); }

  [[nodiscard]] Vector logits(const Vector& x) const { return weights * x / temperature; }
  [[nodiscard]] Vector probabilities(const Vector& x) const { return softmax(logits(x)); }
  /// Columns of `xs` are contexts; returns n x K probabilities.
  [[nodiscard]] Matrix probabilities_batch(const Matrix& xs) const {
    return softmax_columns(weights * xs / temperature);
  }
  [[nodiscard]] ActionId greedy_action(const Vector& x) const { return ActionId(argmax_lowest(weights * x)); }
};

inline Vector softmax_prob(const SoftmaxLinearPolicy& policy, const ContextVector& x) {
  validate_context(x);
  if (x.dim() != policy.dim()) throw ValidationError("context dimension does not match policy");
  return policy.probabilities(x.values);
}

/// Greedy on linear scores with probability 1 - epsilon, uniform otherwise.
struct EpsilonGreedyPolicy {
  Matrix weights;  // n x m
  double epsilon = 0.1;

  EpsilonGreedyPolicy() = default;
  EpsilonGreedyPolicy(Matrix w, double eps) : weights(std::move(w)), epsilon(eps) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must lie in [0, 1]");
  }

  [[nodiscard]] std::size_t n_actions() const { return static_cast<std::size_t>(weights.rows()); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(weights.cols()); }
  [[nodiscard]] ActionId greedy_action(const Vector& x) const { return ActionId(argmax_lowest(weights * x)); }

  [[nodiscard]] Vector probabilities(const Vector& x) const {
    const auto n = static_cast<Eigen::Index>(n_actions());
    Vector p = Vector::Constant(n, epsilon / static_cast<double>(n));
    p[static_cast<Eigen::Index>(greedy_action(x).id)] += 1.0 - epsilon;
    return p;
  }
  [[nodiscard]] Matrix probabilities_batch(const Matrix& xs) const {
    const auto n = static_cast<Eigen::Index>(n_actions());
    Matrix p = Matrix::Constant(n, xs.cols(), epsilon / static_cast<double>(n));
    const Matrix scores = weights * xs;
    for (Eigen::Index k = 0; k < xs.cols(); ++k) {
      p(static_cast<Eigen::Index>(argmax_lowest(scores.col(k))), k) += 1.0 - epsilon;
    }
    return p;
  }
  /// Smallest probability this policy ever assigns.
  [[nodiscard]] double min_propensity() const { return epsilon / static_cast<double>(n_actions()); }
};

/// (1 - epsilon) * base + epsilon * uniform. Keeps every propensity >= epsilon / n.
template <StochasticPolicy Base>
struct UniformMixture {
  Base base;
  double epsilon = 0.1;

  [[nodiscard]] std::size_t n_actions() const { return base.n_actions(); }
  [[nodiscard]] Vector probabilities(const Vector& x) const {
    const double floor = epsilon / static_cast<double>(n_actions());
    return ((1.0 - epsilon) * base.probabilities(x).array() + floor).matrix();
  }
  [[nodiscard]] Matrix probabilities_batch(const Matrix& xs) const {
    const double floor = epsilon / static_cast<double>(n_actions());
    return ((1.0 - epsilon) * base.probabilities_batch(xs).array() + floor).matrix();
  }
  [[nodiscard]] double min_propensity() const { return epsilon / static_cast<double>(n_actions()); }
};

struct SampledAction {
  ActionId action;
  double propensity = 1.0;
};

/// Draws an action from a probability vector; the returned propensity is the
/// exact probability used for the draw.
template <class Rng>
SampledAction sample_from(const Vector& probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (Eigen::Index a = 0; a < probs.size(); ++a) {
    if (probs[a] <= 0.0) continue;
    last_positive = static_cast<std::size_t>(a);
    cum += probs[a];
    if (u < cum) return {ActionId(static_cast<std::size_t>(a)), probs[a]};
  }
  // u landed in the rounding gap above the cumulative sum
  return {ActionId(last_positive), probs[static_cast<Eigen::Index>(last_positive)]};
}

template <StochasticPolicy P, class Rng>
SampledAction sample_action(const P& policy, const ContextVector& x, Rng& rng) {
  return sample_from(policy.probabilities(x.values), rng);
}

// ---------------------------------------------------------------------------
// LinUCB

class LinUcbState {
 public:
  LinUcbState(std::size_t n, std::size_t m, double alpha = 1.0) : alpha_(alpha) {
    if (!(alpha >= 0.0)) throw ValidationError("LinUCB alpha must be non-negative");
    const auto dim = static_cast<Eigen::Index>(m);
    design_.assign(n, Matrix::Identity(dim, dim));
    response_.assign(n, Vector::Zero(dim));
    factor_.assign(n, Eigen::LLT<Matrix>(Matrix::Identity(dim, dim)));
  }

  [[nodiscard]] std::size_t n_actions() const { return design_.size(); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(response_.front().size()); }
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] const Matrix& design(ActionId a) const { return design_.at(a.id); }
  [[nodiscard]] const Vector& response(ActionId a) const { return response_.at(a.id); }

  /// theta_a = A_a^{-1} b_a
  [[nodiscard]] Vector theta(ActionId a) const { return factor_.at(a.id).solve(response_.at(a.id)); }

  [[nodiscard]] double score(ActionId a, const Vector& x) const {
    const auto& f = factor_.at(a.id);
    const Vector ainv_x = f.solve(x);
    return theta(a).dot(x) + alpha_ * std::sqrt(std::max(0.0, x.dot(ainv_x)));
  }

  void update(const Vector& x, ActionId a, double r) {
    auto& A = design_.at(a.id);
    A.noalias() += x * x.transpose();
    response_[a.id] += r * x;
    factor_[a.id].compute(A);
    if (factor_[a.id].info() != Eigen::Success) throw NumericalError("LinUCB design matrix is not SPD");
  }

 private:
  double alpha_;
  std::vector<Matrix> design_;
  std::vector<Vector> response_;
  std::vector<Eigen::LLT<Matrix>> factor_;
};

inline ActionId linucb_select(const LinUcbState& state, const ContextVector& x) {
  Vector scores(static_cast<Eigen::Index>(state.n_actions()));
  for (std::size_t a = 0; a < state.n_actions(); ++a) {
    scores[static_cast<Eigen::Index>(a)] = state.score(ActionId(a), x.values);
  }
  return ActionId(argmax_lowest(scores));
}

inline LinUcbState linucb_update(LinUcbState state, const ContextVector& x, ActionId a, double r) {
  state.update(x.values, a, r);
  return state;
}

// ---------------------------------------------------------------------------
// Thompson sampling with a Gaussian linear model per action.

class ThompsonState {
 public:
  ThompsonState(std::size_t n, std::size_t m, double prior_variance = 1.0, double noise_variance = 1.0)
      : ThompsonState(Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)), prior_variance,
                      noise_variance) {}

  /// Prior mean per action taken from the rows of `prior_mean` (warm start).
  ThompsonState(const Matrix& prior_mean, double prior_variance, double noise_variance)
      : prior_variance_(prior_variance), noise_variance_(noise_variance) {
    if (!(prior_variance > 0.0) || !(noise_variance > 0.0)) {
      throw ValidationError("Thompson variances must be positive");
    }
    const auto dim = prior_mean.cols();
    const Matrix p0 = Matrix::Identity(dim, dim) / prior_variance;
    for (Eigen::Index a = 0; a < prior_mean.rows(); ++a) {
      precision_.push_back(p0);
      const Vector mu0 = prior_mean.row(a).transpose();
      information_.push_back(p0 * mu0);
      factor_.emplace_back(p0);
      mean_.push_back(mu0);
    }
  }

  [[nodiscard]] std::size_t n_actions() const { return precision_.size(); }
  [[nodiscard]] const Matrix& precision(ActionId a) const { return precision_.at(a.id); }
  [[nodiscard]] const Vector& mean(ActionId a) const { return mean_.at(a.id); }
  [[nodiscard]] double noise_variance() const { return noise_variance_; }
  [[nodiscard]] double prior_variance() const { return prior_variance_; }

  /// Draws weights from N(mean_a, precision_a^{-1}).
  template <class Rng>
  [[nodiscard]] Vector sample_weights(ActionId a, Rng& rng) const {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector z(mean_[a.id].size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = gauss(rng);
    // precision = L L^T, so L^{-T} z has covariance precision^{-1}
    return mean_[a.id] + factor_[a.id].matrixU().solve(z);
  }

  void update(const Vector& x, ActionId a, double r) {
    precision_.at(a.id).noalias() += x * x.transpose() / noise_variance_;
    information_[a.id] += r * x / noise_variance_;
    factor_[a.id].compute(precision_[a.id]);
    if (factor_[a.id].info() != Eigen::Success) throw NumericalError("Thompson precision matrix is not SPD");
    mean_[a.id] = factor_[a.id].solve(information_[a.id]);
  }

 private:
  double prior_variance_;
  double noise_variance_;
  std::vector<Matrix> precision_;
  std::vector<Vector> information_;  // precision * mean
  std::vector<Eigen::LLT<Matrix>> factor_;
  std::vector<Vector> mean_;
};

template <class Rng>
ActionId thompson_select(const ThompsonState& state, const ContextVector& x, Rng& rng) {
  Vector scores(static_cast<Eigen::Index>(state.n_actions()));
  for (std::size_t a = 0; a < state.n_actions(); ++a) {
    scores[static_cast<Eigen::Index>(a)] = state.sample_weights(ActionId(a), rng).dot(x.values);
  }
  return ActionId(argmax_lowest(scores));
}

inline ThompsonState thompson_update(ThompsonState state, const ContextVector& x, ActionId a, double r) {
  state.update(x.values, a, r);
  return state;
}

// ---------------------------------------------------------------------------
// Ranking

struct LinearRanker {
  Vector weights;

  LinearRanker() = default;
  explicit LinearRanker(std::size_t m) : weights(Vector::Zero(static_cast<Eigen::Index>(m))) {}
  explicit LinearRanker(Vector w) : weights(std::move(w)) {}
};

/// Sorts candidates (rows of `docs`) by descending score, ties by ascending doc id.
inline RankedList rank_candidates(const LinearRanker& ranker, const Matrix& docs) {
  if (docs.rows() == 0) throw ValidationError("rank_candidates needs at least one candidate");
  const Vector scores = docs * ranker.weights;
  RankedList out;
  out.doc_ids.resize(static_cast<std::size_t>(docs.rows()));
  std::iota(out.doc_ids.begin(), out.doc_ids.end(), std::size_t{0});
  std::stable_sort(out.doc_ids.begin(), out.doc_ids.end(), [&](std::size_t a, std::size_t b) {
    return scores[static_cast<Eigen::Index>(a)] > scores[static_cast<Eigen::Index>(b)];
  });
  out.scores.reserve(out.doc_ids.size());
  for (auto id : out.doc_ids) out.scores.push_back(scores[static_cast<Eigen::Index>(id)]);
  return out;
}

// ---------------------------------------------------------------------------
// Weight serialization: {kind, n, m, weights (row-major), hyperparams}

inline nlohmann::json weights_json(const Matrix& w) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(w.size()));
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
  return flat;
}

inline Matrix weights_from_json(const nlohmann::json& j) {
  const auto n = j.at("n").get<Eigen::Index>();
  const auto m = j.at("m").get<Eigen::Index>();
  const auto flat = j.at("weights").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != n * m) throw ValidationError("weight count does not match n*m");
  Matrix w(n, m);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < m; ++c) w(r, c) = flat[static_cast<std::size_t>(r * m + c)];
  return w;
}

inline nlohmann::json to_json(const SoftmaxLinearPolicy& p) {
  return {{"kind", "softmax"}, {"n", p.weights.rows()}, {"m", p.weights.cols()},
          {"weights", weights_json(p.weights)}, {"hyperparams", {{"temperature", p.temperature}}}};
}

inline nlohmann::json to_json(const EpsilonGreedyPolicy& p) {
  return {{"kind", "epsilon-greedy"}, {"n", p.weights.rows()}, {"m", p.weights.cols()},
          {"weights", weights_json(p.weights)}, {"hyperparams", {{"epsilon", p.epsilon}}}};
}

inline nlohmann::json to_json(const LinearRanker& r) {
  return {{"kind", "linear-ranker"}, {"n", 1}, {"m", r.weights.size()},
          {"weights", weights_json(r.weights.transpose())}, {"hyperparams", nlohmann::json::object()}};
}

/// Loads the weight matrix of any serialized policy, for warm starts.
inline Matrix load_weights(const nlohmann::json& j) { return weights_from_json(j); }

inline SoftmaxLinearPolicy softmax_from_json(const nlohmann::json& j) {
  double temp = 1.0;
  if (j.contains("hyperparams") && j["hyperparams"].contains("temperature")) {
    temp = j["hyperparams"]["temperature"].get<double>();
  }
  return SoftmaxLinearPolicy(weights_from_json(j), temp);
}

inline EpsilonGreedyPolicy epsilon_greedy_from_json(const nlohmann::json& j) {
  return EpsilonGreedyPolicy(weights_from_json(j), j.at("hyperparams").at("epsilon").get<double>());
}

inline LinearRanker ranker_from_json(const nlohmann::json& j) {
  return LinearRanker(Vector(weights_from_json(j).row(0).transpose()));
}

}  // namespace sea
