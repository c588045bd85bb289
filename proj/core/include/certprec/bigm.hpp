#pragma once

// Entrywise bounds on the optimal precision matrix over the level set
// { Theta > 0 : <Sigma, Theta> - log det Theta <= u }, from a one-dimensional
// concave dual maximized by safeguarded Newton. Any dual value is a valid
// bound, so early termination only loosens it.

#include <cstddef>
#include <span>
#include <vector>

#include "certprec/linalg.hpp"
#include "certprec/regularizer.hpp"
#include "certprec/support.hpp"

namespace certprec {

struct EntryBounds {
  Pair pair;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;
};

/// u = <Sigma, Theta_hat> - log det Theta_hat. Throws kNotPositiveDefinite.
double level_from_feasible(const SymmetricMatrix& sigma, const SymmetricMatrix& theta_hat);

/// g(lambda) = lambda * (c + log q(lambda)), q = 1 + a / lambda + b / lambda^2,
/// with c = p - u + log det Sigma, a = Theta_ij, b = (Theta_ij^2 - Theta_ii Theta_jj) / 4
/// and Theta = Sigma^{-1}. Defined (finite) for lambda above domain_start().
struct ScalarDual {
  double c = 0.0;
  double a = 0.0;
  double b = 0.0;

  double domain_start() const;
  double value(double lambda) const;
  double derivative(double lambda) const;
  double second_derivative(double lambda) const;
  /// sup over lambda > 0 of g; returns `a` directly when c >= 0 (the level
  /// set is at most the unconstrained optimum).
  double maximize(double tol = 1e-10) const;
};

/// Precomputes Sigma^{-1} and log det Sigma for repeated entry queries.
class BoundOracle {
 public:
  /// Throws kNotPositiveDefinite when Sigma is singular.
  explicit BoundOracle(const SymmetricMatrix& sigma);

  std::size_t dim() const noexcept { return inverse_.dim(); }
  const SymmetricMatrix& inverse() const noexcept { return inverse_; }
  double log_det_sigma() const noexcept { return log_det_; }

  ScalarDual lower_dual(double u, std::size_t i, std::size_t j) const;
  EntryBounds entry(double u, std::size_t i, std::size_t j, double newton_tol = 1e-10) const;
  std::vector<EntryBounds> all_pairs(double u, double newton_tol = 1e-10) const;

 private:
  SymmetricMatrix inverse_;
  double log_det_ = 0.0;
};

EntryBounds entry_bounds(const SymmetricMatrix& sigma, double u, std::size_t i, std::size_t j,
                         double newton_tol = 1e-10);

/// Dense reference for g: lambda * (p - u + log det(Sigma + (e_i e_j^T + e_j e_i^T) / (2 lambda))).
double dual_objective_dense(const SymmetricMatrix& sigma, double u, std::size_t i,
                            std::size_t j, double lambda);

/// M_ij = inflation * max(|lower|, |upper|), floored at 1e-8; diagonal unbounded.
BigM bounds_to_bigm(std::span<const EntryBounds> bounds, std::size_t p, double inflation = 1.1);

/// Level of the diagonal-only fit Theta = diag(1 / Sigma_ii), which every
/// budget k >= 0 can match: p + sum_i log Sigma_ii.
double diagonal_level(const SymmetricMatrix& sigma);

/// Big-M bounds valid for every budget: entry bounds at diagonal_level,
/// inflated. Throws kNotPositiveDefinite when Sigma is singular.
BigM default_bigm(const SymmetricMatrix& sigma, double inflation = 1.1);

/// Sigma + shift * mean(diag Sigma) * I, for covariances that are singular
/// (n < p). Bounds derived from it are heuristic.
SymmetricMatrix shifted_covariance(const SymmetricMatrix& sigma, double relative_shift = 1e-3);

}  // namespace certprec
