#include <gtest/gtest.h>

#include <numeric>

#include "sea/verify.hpp"

namespace sea::verify {
namespace {

TEST(Suites, QuickSuitesPass) {
  const auto opt = Options::quick();
  for (const auto& name : suite_names()) {
    if (name == "safety") continue;  // covered by the acceptance run
    const auto report = run_suite(name, opt);
    EXPECT_TRUE(report.passed()) << to_json(report).dump(2);
    EXPECT_FALSE(report.checks.empty()) << name;
  }
}

TEST(Suites, UnknownSuiteListsAvailable) {
  try {
    run_suite("nonsense");
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    for (const auto& name : suite_names()) EXPECT_NE(msg.find(name), std::string::npos) << name;
  }
}

TEST(Checks, ComparisonHelpers) {
  EXPECT_TRUE(at_most("x", 1.0, 1.0).passed);
  EXPECT_FALSE(at_most("x", 1.1, 1.0).passed);
  EXPECT_TRUE(at_least("x", 0.95, 0.95).passed);
  EXPECT_FALSE(at_least("x", std::nan(""), 0.95).passed);
  const SuiteReport r{"demo", {at_most("inf", std::numeric_limits<double>::infinity(), 1.0)}, 0.0};
  const auto j = to_json(r);
  EXPECT_EQ(j["checks"][0]["observed"], "inf");
  EXPECT_FALSE(j["passed"].get<bool>());
}

TEST(Estimators, FastPathDiffersOnceAggregateIsCorrupted) {
  // sanity check that the equivalence oracle is sensitive to a wrong aggregate
  std::mt19937_64 rng(1);
  RandomLogSpec spec;
  spec.rounds = 500;
  const auto data = make_random_log(spec, rng);
  const SoftmaxLinearPolicy target(Matrix::Zero(10, 5));
  StreamingEstimatorState state;
  for (const auto& item : data.log) state.update(item);
  const auto terms = ips_point_terms(data.log, target);
  const double naive = std::accumulate(terms.begin(), terms.end(), 0.0) / static_cast<double>(terms.size());
  EXPECT_NEAR(estimate_mean_fast(state, target), naive, 1e-12);
  LoggedInteraction extra = data.log[0];
  extra.reward = 1.0;
  state.update(extra);
  EXPECT_GT(std::abs(estimate_mean_fast(state, target) - naive), 1e-9);
}

TEST(Gradients, NumericGradientOfQuadratic) {
  Matrix w(2, 2);
  w << 1.0, -2.0, 0.5, 3.0;
  const Matrix g = detail::numeric_gradient(w, [](const Matrix& m) { return m.squaredNorm(); });
  EXPECT_LT(detail::relative_error(2.0 * w, g), 1e-8);
}

TEST(Coverage, FiniteEnvTruthOfUniformPolicy) {
  std::mt19937_64 rng(2);
  const auto env = make_finite_env(3, 4, 2, rng);
  const SoftmaxLinearPolicy uniform(Matrix::Zero(3, 2));
  EXPECT_NEAR(finite_true_value(env, uniform), env.mean_reward.mean(), 1e-12);
}

TEST(Interleaving, ExhaustiveAuditSmall) {
  const auto audit = audit_interleaving(3, 6, 10);
  EXPECT_GT(audit.cases, 0u);
  EXPECT_EQ(audit.failures, 0u);
}

TEST(Ndcg, AuditFindsNoViolations) {
  const auto audit = audit_ndcg(4, 10);
  EXPECT_GT(audit.orderings, 0u);
  EXPECT_EQ(audit.out_of_range, 0u);
  EXPECT_EQ(audit.monotonicity_violations, 0u);
}

}  // namespace
}  // namespace sea::verify
