#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "certprec/bigm.hpp"
#include "certprec/error.hpp"
#include "oracles.hpp"

using namespace certprec;

namespace {

// Exact min of Theta_01 over the 2x2 level set. For fixed (theta_00, t) the
// best theta_11 is closed form; theta_00 is found by golden section and t by
// bisection on feasibility.
double min_offdiag_2x2(const SymmetricMatrix& s, double u) {
  auto best_value = [&](double t) {
    auto f = [&](double a) {
      const double d = (a / s(1, 1) + t * t) / a;
      return s(0, 0) * a + s(1, 1) * d + 2.0 * s(0, 1) * t - std::log(a * d - t * t);
    };
    const double a = oracle::golden_section(f, 1e-9, 1e3, 1e-14);
    return f(a);
  };
  const Eigen::MatrixXd inv = oracle::dense_inverse(s);
  double feasible = inv(0, 1), infeasible = inv(0, 1) - 1.0;
  while (best_value(infeasible) <= u) infeasible -= 2.0 * (feasible - infeasible);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (feasible + infeasible);
    (best_value(mid) <= u ? feasible : infeasible) = mid;
  }
  return feasible;
}

}  // namespace

TEST(BigMBounds, LevelFromFeasible) {
  EXPECT_NEAR(level_from_feasible(SymmetricMatrix::identity(3), SymmetricMatrix::identity(3)),
              3.0, 1e-14);
}

TEST(BigMBounds, IdentityAtMinimalLevelGivesZeroBounds) {
  // u equals the unconstrained optimum, so the level set is {Sigma^{-1}}.
  const EntryBounds b = entry_bounds(SymmetricMatrix::identity(4), 4.0, 1, 3);
  EXPECT_EQ(b.lower, 0.0);
  EXPECT_EQ(b.upper, 0.0);
  EXPECT_EQ(b.pair, (Pair{1, 3}));
}

TEST(BigMBounds, ClosedFormMatchesDenseDual) {
  Rng rng(5);
  const SymmetricMatrix sigma = oracle::random_spd(5, rng);
  const BoundOracle bo(sigma);
  const double u = 5.0 + bo.log_det_sigma() + 2.0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = i + 1; j < 5; ++j) {
      const ScalarDual g = bo.lower_dual(u, i, j);
      for (double lambda : {0.2, 0.7, 1.0, 3.0, 25.0}) {
        if (lambda <= g.domain_start()) continue;
        const double dense = dual_objective_dense(sigma, u, i, j, lambda);
        EXPECT_NEAR(g.value(lambda), dense, 1e-9 * std::max(1.0, std::abs(dense)));
      }
    }
  }
}

TEST(BigMBounds, DerivativesMatchFiniteDifferences) {
  const ScalarDual g{-0.7, 0.3, -0.4};
  for (double lambda : {1.0, 1.7, 4.0, 12.0}) {
    const double h = 1e-5 * lambda;
    const double d1 = (g.value(lambda + h) - g.value(lambda - h)) / (2.0 * h);
    const double d2 = (g.derivative(lambda + h) - g.derivative(lambda - h)) / (2.0 * h);
    EXPECT_NEAR(g.derivative(lambda), d1, 1e-7);
    EXPECT_NEAR(g.second_derivative(lambda), d2, 1e-6);
    EXPECT_LT(g.second_derivative(lambda), 0.0);
  }
  EXPECT_NEAR(g.domain_start(), 0.5 * (-0.3 + std::sqrt(0.09 + 1.6)), 1e-15);
}

TEST(BigMBounds, MaximizeBeatsGridSearch) {
  const ScalarDual g{-0.5, -0.2, -0.3};
  const double best = g.maximize();
  double grid = -std::numeric_limits<double>::infinity();
  for (double lambda = g.domain_start() + 1e-4; lambda < 50.0; lambda += 1e-3) {
    grid = std::max(grid, g.value(lambda));
  }
  EXPECT_GE(best, grid - 1e-9);
  EXPECT_LE(best, grid + 1e-5);
}

TEST(BigMBounds, TwoByTwoBoundsAreExact) {
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const SymmetricMatrix sigma = oracle::random_spd(2, rng, 0.3);
    const double u_min = 2.0 + oracle::dense_log_det(sigma);
    const double u = u_min + 0.1 + rng.uniform();
    const EntryBounds b = entry_bounds(sigma, u, 0, 1, 1e-12);
    EXPECT_NEAR(b.lower, min_offdiag_2x2(sigma, u), 1e-6) << "trial " << trial;
    SymmetricMatrix flipped = sigma;
    flipped.set(0, 1, -sigma(0, 1));
    EXPECT_NEAR(b.upper, -min_offdiag_2x2(flipped, u), 1e-6) << "trial " << trial;
  }
}

TEST(BigMBounds, BoundsContainLevelSetMembers) {
  const std::size_t p = 5;
  Rng rng(77);
  const SymmetricMatrix sigma = oracle::random_spd(p, rng);
  const Eigen::MatrixXd inv = oracle::dense_inverse(sigma);
  const Support z(p, {{0, 1}, {2, 3}, {1, 4}});
  const auto sol = solve_covsel(sigma, z, Ridge{1.0});
  const double u = level_from_feasible(sigma, sol.theta);
  const BoundOracle bo(sigma);
  const auto bounds = bo.all_pairs(u);
  ASSERT_EQ(bounds.size(), pair_count(p));
  // Members: the feasible point, Sigma^{-1}, and random convex combinations
  // of them (the level set is convex).
  for (int m = 0; m < 50; ++m) {
    const double w = m == 0 ? 1.0 : rng.uniform();
    for (const EntryBounds& b : bounds) {
      const double v = w * sol.theta(b.pair.i, b.pair.j) + (1.0 - w) * inv(b.pair.i, b.pair.j);
      EXPECT_LE(b.lower, v + 1e-9);
      EXPECT_GE(b.upper, v - 1e-9);
    }
  }
}

TEST(BigMBounds, WidenWithTheLevel) {
  Rng rng(3);
  const SymmetricMatrix sigma = oracle::random_spd(4, rng);
  const BoundOracle bo(sigma);
  const double u0 = 4.0 + bo.log_det_sigma();
  double lo = 0.0, hi = 0.0;
  for (double du : {0.01, 0.1, 1.0, 5.0}) {
    const EntryBounds b = bo.entry(u0 + du, 0, 2);
    if (du > 0.01) {
      EXPECT_LE(b.lower, lo + 1e-12);
      EXPECT_GE(b.upper, hi - 1e-12);
    }
    lo = b.lower;
    hi = b.upper;
    EXPECT_LT(b.lower, bo.inverse()(0, 2));
    EXPECT_GT(b.upper, bo.inverse()(0, 2));
  }
}

TEST(BigMBounds, ToBigM) {
  const std::vector<EntryBounds> b{{{0, 1}, -0.5, 0.2, 0.0}, {{1, 2}, 0.0, 0.0, 0.0}};
  const BigM m = bounds_to_bigm(b, 3, 1.1);
  EXPECT_DOUBLE_EQ(m.bounds(0, 1), 0.55);
  EXPECT_DOUBLE_EQ(m.bounds(1, 2), 1e-8);
  EXPECT_DOUBLE_EQ(m.bounds(0, 2), 1e-8);
  EXPECT_TRUE(std::isinf(m.bounds(1, 1)));
  EXPECT_THROW(bounds_to_bigm(b, 3, 0.9), Error);
}

TEST(BigMBounds, SingularCovarianceIsRejected) {
  SymmetricMatrix s(2);
  s.set(0, 0, 1.0);
  s.set(1, 1, 1.0);
  s.set(0, 1, 1.0);
  EXPECT_THROW(BoundOracle{s}, Error);
  const SymmetricMatrix shifted = shifted_covariance(s, 1e-3);
  EXPECT_NO_THROW(BoundOracle{shifted});
  EXPECT_DOUBLE_EQ(shifted(0, 0), 1.001);
}

TEST(BigMBounds, DefaultBigMCoversEveryBudget) {
  // Optima at any k have objective at most the diagonal fit's level, so the
  // default bounds never bind on the unregularized optimum.
  const std::size_t p = 4;
  const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 12, 19);
  SymmetricMatrix diag(p);
  for (std::size_t i = 0; i < p; ++i) diag.set(i, i, 1.0 / sigma(i, i));
  EXPECT_NEAR(diagonal_level(sigma), level_from_feasible(sigma, diag), 1e-12);
  const BigM m = default_bigm(sigma);
  const auto table =
      oracle::enumerate_all(sigma, BigM::uniform(p, kUnbounded), 1e-10, /*keep_theta=*/true);
  for (std::size_t mask = 0; mask < table.value.size(); ++mask) {
    if (table.value[mask] > diagonal_level(sigma)) continue;
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = i + 1; j < p; ++j) {
        EXPECT_LE(std::abs(table.theta[mask](i, j)), m.bounds(i, j) / 1.1 + 1e-6);
      }
    }
  }
}
