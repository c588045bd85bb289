#include <gtest/gtest.h>

#include <json.hpp>

#include <bit>
#include <cmath>
#include <limits>
#include <vector>

#include "certprec/cutplane.hpp"
#include "certprec/error.hpp"
#include "certprec/model.hpp"
#include "oracles.hpp"

using namespace certprec;

namespace {

Cut manual_cut(double c0, std::vector<double> weights) {
  Cut c;
  c.c0 = c0;
  c.weights = std::move(weights);
  return c;
}

SolveOptions tight_options() {
  SolveOptions o;
  o.eps = 1e-8;
  o.covsel.gap_tol = 1e-10;
  o.covsel.improve_tol = 1e-15;
  return o;
}

Regularizer test_ridge(const SymmetricMatrix& sigma) {
  return scaled_regularizer(RegKind::kRidge, sigma, 1.0);
}

Regularizer test_bigm(std::size_t p) { return BigM::uniform(p, 0.8); }

}  // namespace

TEST(Cut, EvaluationAtSourceReproducesDualValue) {
  const SymmetricMatrix sigma = oracle::random_sample_covariance(5, 12, 3);
  const Support z(5, {{0, 1}, {1, 3}, {2, 4}});
  for (const Regularizer& reg : {test_ridge(sigma), test_bigm(5)}) {
    const auto sol = solve_covsel(sigma, z, reg);
    const Cut cut = make_cut(sigma, sol, z, reg);
    EXPECT_NEAR(cut.evaluate(z), sol.dual_value, 1e-9 * std::max(1.0, std::abs(sol.dual_value)));
    ASSERT_EQ(cut.weights.size(), pair_count(5));
    for (double w : cut.weights) EXPECT_GE(w, 0.0);
    EXPECT_EQ(cut.source_support, z);
  }
}

TEST(Cut, ZeroDualPointGivesFlatCut) {
  // R = 0: every weight vanishes and c0 = p + log det Sigma.
  const SymmetricMatrix sigma = oracle::random_sample_covariance(4, 20, 5);
  const Regularizer reg = Ridge{2.0};
  CovSelSolution sol;
  sol.dual_point = SymmetricMatrix(4);
  sol.dual_value = dual_value(sigma, sol.dual_point, Support(4), reg);
  const Cut cut = make_cut(sigma, sol, Support(4), reg);
  for (double w : cut.weights) EXPECT_EQ(w, 0.0);
  EXPECT_NEAR(cut.c0, 4.0 + oracle::dense_log_det(sigma), 1e-10);
  EXPECT_NEAR(cut.evaluate(Support::full(4)), cut.c0, 1e-12);
}

// Every cut is a global under-estimator of h over all 2^P supports.
TEST(Cut, CutsUnderestimateEverySupport) {
  const std::size_t p = 5;
  const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 10, 11);
  for (const Regularizer& reg : {test_ridge(sigma), test_bigm(p)}) {
    const auto table = oracle::enumerate_all(sigma, reg);
    CuttingPlaneSolver solver(sigma, reg, {}, tight_options());
    solver.solve(3);
    solver.solve(1);
    ASSERT_GT(solver.cuts().size(), 1u);
    for (const Cut& cut : solver.cuts()) {
      for (std::uint32_t mask = 0; mask < table.value.size(); ++mask) {
        ASSERT_LE(cut.evaluate(table.support(mask)), table.value[mask] + 1e-9);
      }
    }
  }
}

TEST(NodeBound, WorkedExamples) {
  MasterState s;
  s.p = 3;
  s.k = 2;
  s.cuts.push_back(manual_cut(10.0, {3.0, 2.0, 1.0}));
  EXPECT_DOUBLE_EQ(node_bound(s, {}, {}), 5.0);
  s.cuts.push_back(manual_cut(8.0, {0.5, 0.5, 0.5}));
  EXPECT_DOUBLE_EQ(node_bound(s, {}, {}), 7.0);
  s.cuts.pop_back();
  const std::vector<Pair> zero{{0, 1}};
  EXPECT_DOUBLE_EQ(node_bound(s, {}, zero), 7.0);
  const std::vector<Pair> one{{1, 2}};
  EXPECT_DOUBLE_EQ(node_bound(s, one, {}), 6.0);
}

TEST(NodeBound, InfeasibleStructureThrows) {
  MasterState s;
  s.p = 3;
  s.k = 1;
  s.cuts.push_back(manual_cut(1.0, {0.0, 0.0, 0.0}));
  s.structural = {KnownOne{{{0, 1}, {0, 2}}}};
  EXPECT_THROW(node_bound(s, {}, {}), Error);
}

TEST(SolveMaster, ConstantCutPicksLexicographicallySmallest) {
  MasterState s;
  s.p = 4;
  s.k = 2;
  s.cuts.push_back(manual_cut(3.0, std::vector<double>(6, 0.0)));
  const auto sol = solve_master(s);
  EXPECT_EQ(sol.support, Support(4, {{0, 1}, {0, 2}}));
  EXPECT_DOUBLE_EQ(sol.eta, 3.0);
}

TEST(SolveMaster, ZeroBudgetReturnsEmptySupport) {
  MasterState s;
  s.p = 4;
  s.k = 0;
  s.cuts.push_back(manual_cut(2.0, {1, 2, 3, 4, 5, 6}));
  const auto sol = solve_master(s);
  EXPECT_TRUE(sol.support.empty());
  EXPECT_DOUBLE_EQ(sol.eta, 2.0);
}

TEST(SolveMaster, MatchesBruteForceOnRandomCuts) {
  Rng rng(2024);
  const std::size_t p = 5, total = pair_count(p);
  for (int trial = 0; trial < 60; ++trial) {
    MasterState s;
    s.p = p;
    s.k = 1 + rng.below(total);
    const std::size_t n_cuts = 1 + rng.below(6);
    for (std::size_t c = 0; c < n_cuts; ++c) {
      std::vector<double> w(total);
      for (double& x : w) x = rng.below(3) == 0 ? 0.0 : 5.0 * rng.uniform();
      s.cuts.push_back(manual_cut(10.0 * rng.uniform(), w));
    }
    if (trial % 3 == 0) s.structural = {DegreeBounds{{0, 1, 0, 0, 0}, {2, 3, 4, 2, 4}}};
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << total); ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(mask)) > s.k) continue;
      std::vector<std::size_t> idx;
      for (std::size_t e = 0; e < total; ++e) {
        if (mask & (1u << e)) idx.push_back(e);
      }
      const Support z = Support::from_indices(p, idx);
      if (!check_complete(z, s.structural)) continue;
      double v = -std::numeric_limits<double>::infinity();
      for (const Cut& c : s.cuts) v = std::max(v, c.evaluate(z));
      best = std::min(best, v);
    }
    const auto sol = solve_master(s);
    EXPECT_NEAR(sol.eta, best, 1e-10) << "trial " << trial;
    EXPECT_LE(sol.support.size(), s.k);
    EXPECT_TRUE(check_complete(sol.support, s.structural));
  }
}

class SolveVsEnumeration : public ::testing::TestWithParam<int> {};

TEST_P(SolveVsEnumeration, AllBudgetsBothRegularizers) {
  const std::size_t p = 4;
  const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 2 * p, 40 + GetParam());
  for (const Regularizer& reg : {test_ridge(sigma), test_bigm(p)}) {
    const auto table = oracle::enumerate_all(sigma, reg);
    for (std::size_t k = 0; k <= pair_count(p); ++k) {
      const double best = oracle::best_value(table, k);
      const SolveResult r = solve(sigma, k, reg, {}, tight_options());
      EXPECT_EQ(r.status, SolveStatus::kOptimal);
      EXPECT_NEAR(r.upper, best, 1e-6 * std::max(1.0, std::abs(best))) << "k=" << k;
      EXPECT_LE(r.lower, best + 1e-7);
      EXPECT_LE(r.support.size(), k);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, SolveVsEnumeration, ::testing::Range(0, 4));

TEST(Solve, FullBudgetAndZeroBudget) {
  const std::size_t p = 4;
  const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 30, 8);
  const Regularizer reg = test_ridge(sigma);
  const SolveResult zero = solve(sigma, 0, reg, {}, tight_options());
  EXPECT_TRUE(zero.support.empty());
  const auto diag = solve_covsel(sigma, Support(p), reg, tight_options().covsel);
  EXPECT_NEAR(zero.upper, diag.primal_value, 1e-8);
  const SolveResult full = solve(sigma, pair_count(p), reg, {}, tight_options());
  const auto dense = solve_covsel(sigma, Support::full(p), reg, tight_options().covsel);
  EXPECT_NEAR(full.upper, dense.primal_value, 1e-7);
}

TEST(Solve, PathMatchesColdSolves) {
  const std::size_t p = 5;
  const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 10, 21);
  const Regularizer reg = test_ridge(sigma);
  const std::vector<std::size_t> ks{4, 3, 2};
  const auto path = solve_path(sigma, ks, reg, {}, tight_options());
  ASSERT_EQ(path.size(), ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const SolveResult cold = solve(sigma, ks[i], reg, {}, tight_options());
    EXPECT_NEAR(path[i].upper, cold.upper, 1e-6);
    EXPECT_EQ(path[i].k, ks[i]);
    if (i > 0) EXPECT_GE(path[i].cut_pool_size, path[i - 1].cut_pool_size);
  }
  const std::vector<std::size_t> bad{2, 3};
  EXPECT_THROW(solve_path(sigma, bad, reg, {}, tight_options()), Error);
}

TEST(Solve, MultiTreeAgreesWithSingleTree) {
  const std::size_t p = 5;
  const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 10, 33);
  const Regularizer reg = test_bigm(p);
  SolveOptions multi = tight_options();
  multi.multi_tree = true;
  for (std::size_t k : {1, 3, 6}) {
    const SolveResult a = solve(sigma, k, reg, {}, tight_options());
    const SolveResult b = solve(sigma, k, reg, {}, multi);
    EXPECT_NEAR(a.upper, b.upper, 1e-6);
  }
}

TEST(Solve, DeterministicAcrossRuns) {
  const SymmetricMatrix sigma = oracle::random_sample_covariance(6, 12, 4);
  const Regularizer reg = test_ridge(sigma);
  const SolveResult a = solve(sigma, 4, reg, {}, tight_options());
  const SolveResult b = solve(sigma, 4, reg, {}, tight_options());
  EXPECT_EQ(a.support, b.support);
  EXPECT_EQ(a.upper, b.upper);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.nodes_explored, b.nodes_explored);
  EXPECT_EQ(a.cuts_generated, b.cuts_generated);
}

TEST(Solve, StructuredMatchesEnumeration) {
  const std::size_t p = 5;
  const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 10, 71);
  const Regularizer reg = test_ridge(sigma);
  const auto table = oracle::enumerate_all(sigma, reg);
  const std::vector<Constraints> cases{
      {KnownZero{{{0, 1}}}, KnownOne{{{2, 3}}}},
      {DegreeBounds{{1, 1, 0, 0, 0}, {2, 2, 2, 2, 2}}},
      {Hubs{1, 3, 1}},
      {AverageDegree{1.6, 0.0}},
  };
  for (std::size_t c = 0; c < cases.size(); ++c) {
    for (std::size_t k : {2, 4, 6}) {
      const double best = oracle::best_value(table, k, cases[c]);
      if (!std::isfinite(best)) {
        EXPECT_THROW(solve(sigma, k, reg, cases[c], tight_options()), Error);
        continue;
      }
      const SolveResult r = solve(sigma, k, reg, cases[c], tight_options());
      EXPECT_NEAR(r.upper, best, 1e-6) << "case " << c << " k=" << k;
      EXPECT_TRUE(check_complete(r.support, cases[c]));
    }
  }
}

TEST(Solve, BudgetLimitedRunsKeepValidBounds) {
  const std::size_t p = 5;
  const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 8, 90);
  const Regularizer reg = test_ridge(sigma);
  const double best = oracle::best_value(oracle::enumerate_all(sigma, reg), 3);
  SolveOptions o = tight_options();
  o.max_nodes = 3;
  o.warm_mode = WarmStartMode::kNone;
  const SolveResult r = solve(sigma, 3, reg, {}, o);
  EXPECT_LE(r.lower, best + 1e-8);
  EXPECT_GE(r.upper, best - 1e-8);
  if (r.status != SolveStatus::kOptimal) EXPECT_EQ(r.status, SolveStatus::kNodeLimit);
}

TEST(Solve, TraceBoundsAreMonotoneAndValid) {
  const std::size_t p = 5;
  const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 10, 55);
  const Regularizer reg = test_bigm(p);
  const double best = oracle::best_value(oracle::enumerate_all(sigma, reg), 3);
  std::vector<TraceEvent> events;
  SolveOptions o = tight_options();
  o.trace = [&](const TraceEvent& ev) { events.push_back(ev); };
  solve(sigma, 3, reg, {}, o);
  ASSERT_FALSE(events.empty());
  double last_lower = -std::numeric_limits<double>::infinity();
  double last_upper = std::numeric_limits<double>::infinity();
  for (const TraceEvent& ev : events) {
    EXPECT_GE(ev.lower, last_lower);
    EXPECT_LE(ev.upper, last_upper);
    EXPECT_LE(ev.lower, best + 1e-7);
    if (std::isfinite(ev.upper)) EXPECT_GE(ev.upper, best - 1e-7);
    last_lower = ev.lower;
    last_upper = ev.upper;
    const auto j = nlohmann::json::parse(to_json_line(ev));
    EXPECT_TRUE(j.contains("event"));
    EXPECT_TRUE(j.contains("lower"));
  }
}

TEST(Solve, RejectsBadInput) {
  const SymmetricMatrix sigma = oracle::random_sample_covariance(4, 10, 1);
  EXPECT_THROW(solve(sigma, 2, BigM::uniform(3, 1.0), {}, {}), Error);
  EXPECT_THROW(solve(sigma, 2, Ridge{-1.0}, {}, {}), Error);
  EXPECT_THROW(solve(sigma, 1, Ridge{1.0}, {KnownOne{{{0, 1}, {0, 2}}}}, {}), Error);
}

TEST(Solve, LocalSearchImprovesPoorWarmStart) {
  const std::size_t p = 5;
  const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 10, 71);
  const Regularizer reg = test_ridge(sigma);
  const auto table = oracle::enumerate_all(sigma, reg);
  const std::size_t k = 3;
  std::uint32_t worst = 0;
  for (std::uint32_t mask = 0; mask < table.value.size(); ++mask) {
    if (std::popcount(mask) != static_cast<int>(k)) continue;
    if (worst == 0 || table.value[mask] > table.value[worst]) worst = mask;
  }
  SolveOptions o = tight_options();
  o.max_nodes = 1;
  o.warm = table.support(worst);
  o.local_search_evals = 0;
  const SolveResult plain = solve(sigma, k, reg, {}, o);
  o.local_search_evals = 200;
  const SolveResult searched = solve(sigma, k, reg, {}, o);
  EXPECT_LT(searched.upper, plain.upper - 1e-6);
  EXPECT_GE(searched.upper, oracle::best_value(table, k) - 1e-8);
  EXPECT_LE(searched.lower, oracle::best_value(table, k) + 1e-8);

  o.max_nodes = 0;
  const SolveResult full = solve(sigma, k, reg, {}, o);
  o.local_search_evals = 0;
  const SolveResult full_plain = solve(sigma, k, reg, {}, o);
  EXPECT_EQ(full.status, SolveStatus::kOptimal);
  EXPECT_NEAR(full.upper, full_plain.upper, 1e-7);
}
