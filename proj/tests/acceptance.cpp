// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sea/verify.hpp"

namespace {

using namespace sea;
using namespace sea::verify;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string describe(const Check& c) {
  return c.name + '=' + format_number(c.observed) + ' ' + c.comparison + ' ' + format_number(c.tolerance);
}

/// Every check when there are a few, otherwise a count plus the failures.
std::string describe(const std::vector<Check>& checks) {
  std::ostringstream out;
  if (checks.size() <= 6) {
    for (std::size_t i = 0; i < checks.size(); ++i) out << (i ? "; " : "") << describe(checks[i]);
    return out.str();
  }
  std::size_t failed = 0;
  for (const auto& c : checks) failed += c.passed ? 0 : 1;
  out << checks.size() << " checks, " << failed << " outside tolerance";
  for (const auto& c : checks) {
    if (!c.passed) out << "; " << describe(c);
  }
  return out.str();
}

Outcome from_checks(const std::vector<Check>& checks) {
  bool ok = !checks.empty();
  for (const auto& c : checks) ok = ok && c.passed;
  return {ok, describe(checks)};
}

double metric_at(const Replication& rep, const std::string& name, std::size_t checkpoint) {
  for (const auto& m : rep.metrics) {
    if (m.metric == name && m.checkpoint == checkpoint) return m.value;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// First deployment round of a run; horizon + 1 if it never deploys.
std::size_t first_deployment(const std::shared_ptr<const ClassificationData>& pool, const std::string& profile_name,
                             std::uint64_t seed, std::size_t horizon, DeployMode mode) {
  const auto profile = reward_profile_by_name(profile_name);
  const auto streams = derive_streams(seed);
  std::mt19937_64 baseline_rng(streams.baseline);
  const auto baseline = make_baseline(*pool, 0.01, SupervisedConfig{}, baseline_rng);
  SeaConfig cfg;
  cfg.mode = mode;
  cfg.keep_log = false;
  SeaState state(baseline, cfg);
  ClassificationEnv env(pool, profile, streams.environment);
  std::mt19937_64 policy_rng(streams.policy);
  for (std::size_t t = 1; t <= horizon; ++t) {
    if (sea_round(state, env, policy_rng).deployed_now) return t;
  }
  return horizon + 1;
}

constexpr std::size_t kSafetySeeds = 10;
constexpr std::size_t kSafetyHorizon = 50000;
std::vector<SafetyRun> g_safety_runs;  // shared by the safety and dominance criteria

Outcome safety() {
  g_safety_runs = audit_safety(kSafetySeeds, kSafetyHorizon);
  std::size_t deployments = 0;
  std::size_t violations = 0;
  double worst_drop = 0.0;
  std::ostringstream where;
  for (const auto& r : g_safety_runs) {
    deployments += r.deployments.size();
    violations += r.violations;
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      const auto [before, after] = r.values[i];
      worst_drop = std::max(worst_drop, before - after);
      if (after < before) {
        where << "; " << r.profile << " seed " << r.seed << " t=" << r.deployments[i] << ' ' << format_number(before)
              << " -> " << format_number(after);
      }
    }
  }
  std::ostringstream d;
  d << g_safety_runs.size() << " runs, " << deployments << " deployments, " << violations
    << " violations, largest value drop " << format_number(worst_drop) << where.str();
  return {violations == 0 && !g_safety_runs.empty(), d.str()};
}

Outcome pre_deployment_identity() {
  ExperimentConfig cfg;
  cfg.method = "sea";
  cfg.horizon = 10000;
  cfg.checkpoints = {100, 1000, 10000};
  cfg.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const auto sea_res = run_replications(cfg);
  cfg.method = "baseline-only";
  const auto base_res = run_replications(cfg);
  std::size_t compared_rounds = 0;
  std::size_t compared_checkpoints = 0;
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const auto& s = sea_res.replications[i];
    const auto& b = base_res.replications[i];
    const std::size_t first = s.deployments.empty() ? cfg.horizon + 1 : s.deployments.front();
    for (std::size_t t = 1; t < first && t <= cfg.horizon; ++t, ++compared_rounds) {
      const auto& rs = s.rows[t - 1];
      const auto& rb = b.rows[t - 1];
      if (rs.action != rb.action || rs.reward != rb.reward) ++mismatches;
    }
    for (auto cp : cfg.checkpoints) {
      if (cp >= first) continue;
      ++compared_checkpoints;
      if (metric_at(s, "cumulative_reward", cp) - metric_at(b, "cumulative_reward", cp) != 0.0) ++mismatches;
    }
  }
  std::ostringstream d;
  d << compared_rounds << " pre-deployment rounds and " << compared_checkpoints << " checkpoints compared over "
    << cfg.seeds.size() << " seeds, " << mismatches << " mismatches";
  return {mismatches == 0 && compared_checkpoints > 0, d.str()};
}

Outcome bsea_dominance() {
  if (g_safety_runs.empty()) g_safety_runs = audit_safety(kSafetySeeds, kSafetyHorizon);
  const auto pool = synthetic_pool();
  std::size_t later = 0;
  std::size_t disagreements = 0;
  std::ostringstream firsts;
  for (const auto& r : g_safety_runs) {
    const std::size_t sea_first = r.deployments.empty() ? kSafetyHorizon + 1 : r.deployments.front();
    const std::size_t bsea_first = first_deployment(pool, r.profile, r.seed, sea_first, DeployMode::Bsea);
    if (bsea_first > sea_first) ++later;
    disagreements += r.boundless_disagreements;
    if (r.seed == 0) firsts << r.profile << " seed 0: BSEA t=" << bsea_first << " SEA t=" << sea_first << ", ";
  }
  std::ostringstream d;
  d << firsts.str() << later << " seeds with a later BSEA deployment, " << disagreements
    << " SEA deployments the mean check rejects";
  return {later == 0 && disagreements == 0, d.str()};
}

Outcome exploration_benefit() {
  constexpr std::size_t kHorizon = 50000;
  ExperimentConfig cfg;
  cfg.horizon = kHorizon;
  cfg.checkpoints = {kHorizon};
  cfg.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  cfg.baseline_fraction = 0.01;
  cfg.lambda_shift = 0.0;
  const auto heldout = [&](const std::string& method) {
    cfg.method = method;
    std::vector<double> v;
    for (const auto& rep : run_replications(cfg).replications) v.push_back(metric_at(rep, "heldout_reward", kHorizon));
    return v;
  };
  const auto sea_v = heldout("sea");
  const auto ips_v = heldout("lambda-ips");
  const auto base_v = heldout("baseline-only");
  const auto test = welch_t_test(sea_v, ips_v);
  const double sea_m = mean(sea_v);
  const double ips_m = mean(ips_v);
  const double base_m = mean(base_v);
  const bool ok = sea_m > ips_m && test.p_value < 0.01 && sea_m >= base_m - 0.01 && ips_m >= base_m - 0.01;
  std::ostringstream d;
  d << "held-out reward SEA " << format_number(sea_m) << ", lambda-IPS " << format_number(ips_m) << ", baseline "
    << format_number(base_m) << "; Welch t=" << format_number(test.t_statistic) << " p=" << format_number(test.p_value);
  return {ok, d.str()};
}

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;  // 0: no runtime requirement
  std::function<Outcome()> run;
};

}  // namespace

// Usage: acceptance [--known-failure ID]...
// A known failure still prints FAIL but does not make the exit status nonzero.
int main(int argc, char** argv) {
  std::set<int> known;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--known-failure" && i + 1 < argc) {
      known.insert(std::stoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--known-failure ID]...\n", argv[0]);
      return 2;
    }
  }
  const Options opt;
  const std::vector<Criterion> criteria{
      {1, "estimator equivalence", 30, [&] { return from_checks({check_estimator_equivalence(opt)}); }},
      {2, "variance identity", 10, [&] { return from_checks({check_variance_identity(opt, 50, 2000)}); }},
      {3, "bound arithmetic", 0, [] { return from_checks(bound_arithmetic_checks()); }},
      {4, "confidence interval coverage", 120,
       [&] { return from_checks({check_coverage(opt, 500, 0.05)}); }},
      {5, "safe deployments", 300, safety},
      {6, "pre-deployment identity", 0, pre_deployment_identity},
      {7, "BSEA dominance", 0, bsea_dominance},
      {8, "exploration benefit", 600, exploration_benefit},
      {9, "environment constants",
       0,
       [&] {
         auto checks = environment_constant_checks();
         for (auto& c : environment_monte_carlo_checks(opt.seed + 5, 100000)) checks.push_back(std::move(c));
         return from_checks(checks);
       }},
      {10, "gradient oracles", 30, [&] { return from_checks(gradient_checks(opt, 100)); }},
      {11, "nDCG", 0, [&] { return from_checks(ndcg_checks(opt.seed + 6)); }},
      {12, "team-draft interleaving", 10,
       [&] {
         const auto audit = audit_interleaving(opt.seed + 4, 10, 40);
         std::ostringstream d;
         d << audit.cases << " coin sequences, " << audit.failures << " failures";
         return Outcome{audit.cases > 0 && audit.failures == 0, d.str()};
       }},
  };

  int failed = 0;
  int tolerated = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.limit_seconds == 0 || secs < c.limit_seconds;
    if (!in_time) out.detail += "; exceeded " + format_number(c.limit_seconds) + " s";
    const bool passed = out.passed && in_time;
    const bool is_known = known.contains(c.id);
    if (!passed) ++(is_known ? tolerated : failed);
    std::printf("%s %2d %-30s %8.2f s  %s%s\n", passed ? "PASS" : "FAIL", c.id, c.name.c_str(), secs,
                out.detail.c_str(), !passed && is_known ? " [known failure]" : "");
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed", criteria.size() - static_cast<std::size_t>(failed + tolerated),
              criteria.size());
  if (tolerated > 0) std::printf(", %d known failure(s)", tolerated);
  std::printf("\n");
  return failed == 0 ? 0 : 1;
}
