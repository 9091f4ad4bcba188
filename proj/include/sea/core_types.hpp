#pragma once
// Shared vocabulary for the bandit toolkit: contexts, actions, logged
// interactions, reward bounds, ranked lists and click records.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sea {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a value violates a domain invariant (bad propensity, reward out of range, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a linear-algebra routine cannot proceed (e.g. a matrix lost positive definiteness).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Propensities below this are rejected on append; 1/p would blow up the IPS weights.
inline constexpr double kMinPropensity = 1e-12;

struct ActionId {
  std::size_t id = 0;

  constexpr ActionId() = default;
  constexpr explicit ActionId(std::size_t v) : id(v) {}
  constexpr auto operator<=>(const ActionId&) const = default;
};

/// Dense feature vector plus an optional key identifying exact duplicates.
/// The key is what the aggregate table uses to group interactions by context.
struct ContextVector {
  Vector values;
  std::optional<std::int64_t> dedup_key;

  ContextVector() = default;
  explicit ContextVector(Vector v, std::optional<std::int64_t> key = std::nullopt)
      : values(std::move(v)), dedup_key(key) {}

  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(values.size()); }
};

inline void validate_context(const ContextVector& x) {
  if (x.values.size() == 0) throw ValidationError("context vector must be non-empty");
  if (!x.values.allFinite()) throw ValidationError("context vector contains NaN or Inf");
}

struct LoggedInteraction {
  ContextVector context;
  ActionId action;
  double reward = 0.0;
  double propensity = 1.0;

  /// r / p, the importance weight carried by this interaction.
  [[nodiscard]] double weighted_reward() const { return reward / propensity; }
};

inline void validate_interaction(const LoggedInteraction& item) {
  if (!(item.reward >= 0.0 && item.reward <= 1.0)) {
    throw ValidationError("reward must lie in [0, 1], got " + std::to_string(item.reward));
  }
  if (!(item.propensity >= kMinPropensity && item.propensity <= 1.0)) {
    throw ValidationError("propensity must lie in (0, 1], got " + std::to_string(item.propensity));
  }
  validate_context(item.context);
}

/// Append-only record of bandit feedback.
class InteractionLog {
 public:
  InteractionLog() = default;

  void append(LoggedInteraction item) {
    validate_interaction(item);
    entries_.push_back(std::move(item));
  }

  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }
  [[nodiscard]] const LoggedInteraction& operator[](std::size_t i) const { return entries_[i]; }
  [[nodiscard]] const LoggedInteraction& back() const { return entries_.back(); }
  [[nodiscard]] const std::vector<LoggedInteraction>& entries() const { return entries_; }
  [[nodiscard]] auto begin() const { return entries_.begin(); }
  [[nodiscard]] auto end() const { return entries_.end(); }

 private:
  std::vector<LoggedInteraction> entries_;
};

/// Value-returning form of InteractionLog::append.
inline InteractionLog log_append(InteractionLog log, LoggedInteraction item) {
  log.append(std::move(item));
  return log;
}

/// Upper bound b on any importance-weighted reward r/p.
inline double reward_bound_b(double max_reward, double min_propensity) {
  if (!(max_reward > 0.0) || !(min_propensity > 0.0)) {
    throw ValidationError("reward bound needs positive max reward and min propensity");
  }
  return max_reward / min_propensity;
}

struct RewardBounds {
  double max_reward = 1.0;
  double min_propensity = 1.0;

  [[nodiscard]] double b() const { return reward_bound_b(max_reward, min_propensity); }
};

/// A displayed ordering of a query's candidates, best first.
struct RankedList {
  std::vector<std::size_t> doc_ids;
  std::vector<double> scores;

  [[nodiscard]] std::size_t size() const { return doc_ids.size(); }

  /// 1-based rank of each doc id (index = doc id).
  [[nodiscard]] std::vector<std::size_t> ranks() const {
    std::vector<std::size_t> r(doc_ids.size(), 0);
    for (std::size_t pos = 0; pos < doc_ids.size(); ++pos) r[doc_ids[pos]] = pos + 1;
    return r;
  }
};

inline bool is_permutation_of_range(const std::vector<std::size_t>& ids) {
  std::vector<char> seen(ids.size(), 0);
  for (auto id : ids) {
    if (id >= ids.size() || seen[id]) return false;
    seen[id] = 1;
  }
  return true;
}

/// Checks both RankedList invariants: permutation, and non-increasing scores.
inline bool is_valid_ranked_list(const RankedList& list) {
  if (list.scores.size() != list.doc_ids.size()) return false;
  if (!is_permutation_of_range(list.doc_ids)) return false;
  for (std::size_t i = 1; i < list.scores.size(); ++i) {
    if (list.scores[i] > list.scores[i - 1]) return false;
  }
  return true;
}

inline constexpr std::size_t kClickCutoff = 10;

struct ClickRecord {
  std::size_t rank = 0;  // 1-based
  std::size_t doc_id = 0;
  bool examined = false;
  bool clicked = false;
  double propensity = 0.0;  // examination probability at this rank
};

/// A clicked document and the examination probability of the rank it was shown at.
struct LoggedClick {
  std::size_t doc_id = 0;
  double propensity = 1.0;  // examination probability at the displayed rank
};

}  // namespace sea
