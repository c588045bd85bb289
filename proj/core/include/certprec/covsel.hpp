#pragma once

// Covariance selection on a fixed support: minimize
//   <Sigma, Theta> - log det Theta + Omega(Theta)   s.t. Theta_ij = 0 off the support
// by greedy single-coordinate descent, with a dual certificate at every
// iterate.

#include <cstddef>
#include <optional>

#include "certprec/linalg.hpp"
#include "certprec/regularizer.hpp"
#include "certprec/support.hpp"

namespace certprec {

/// Per-entry view of a regularizer: a box |x| <= bound or a ridge term
/// x^2 / (2 gamma) per matrix entry.
struct EntryPenalty {
  enum class Kind { kBox, kRidge };
  Kind kind = Kind::kBox;
  double param = kUnbounded;  // M_ij for a box, gamma for ridge

  static EntryPenalty box(double bound) { return {Kind::kBox, bound}; }
  static EntryPenalty ridge(double gamma) { return {Kind::kRidge, gamma}; }
  static EntryPenalty of(const Regularizer& reg, std::size_t i, std::size_t j);
};

struct CoordinateStep {
  double t = 0.0;
  double decrease = 0.0;
};

/// Best step t for Theta_ij += t (both symmetric entries), i != j, and the
/// exact objective decrease. Requires w to come from a positive definite W.
CoordinateStep off_diagonal_step(double sigma_ij, double w_ii, double w_jj, double w_ij,
                                 double theta_ij, EntryPenalty pen);

/// Best step t for Theta_ii += 2t and the exact objective decrease.
CoordinateStep diagonal_step(double sigma_ii, double w_ii, double theta_ii, EntryPenalty pen);

enum class CovSelStatus {
  kConverged,       // gap <= gap_tol
  kStalled,         // best decrease fell below improve_tol first
  kIterationLimit,  // max_iter reached above gap_tol; bounds still valid
};

const char* to_string(CovSelStatus status);

struct CovSelOptions {
  double gap_tol = 1e-4;
  double improve_tol = 1e-12;
  /// 0 selects 2000 * (p + |support|).
  std::size_t max_iter = 0;
  std::size_t refresh_every = 500;
  /// Damped Newton steps on the free coordinates between greedy sweeps when
  /// p + |support| is small enough for a dense Hessian.
  bool newton_polish = true;
};

struct CovSelSolution {
  SymmetricMatrix theta;
  SymmetricMatrix w_inv;
  double primal_value = 0.0;
  SymmetricMatrix dual_point;
  double dual_value = 0.0;
  double gap = 0.0;
  std::size_t iterations = 0;
  CovSelStatus status = CovSelStatus::kConverged;
};

CovSelSolution solve_covsel(const SymmetricMatrix& sigma, const Support& z,
                            const Regularizer& reg, const CovSelOptions& options = {});

/// <Sigma, Theta> - log det Theta + Omega(Theta).
double primal_objective(const SymmetricMatrix& sigma, const SymmetricMatrix& theta,
                        const Regularizer& reg);

/// R = Theta^{-1} - Sigma; always dual feasible since Sigma + R = Theta^{-1}.
SymmetricMatrix dual_point(const SymmetricMatrix& sigma, const SymmetricMatrix& theta);

/// Dual point built from W = Theta^{-1} that keeps the dual objective finite
/// for big-M entries with infinite bounds: rows/columns whose diagonal bound
/// is infinite are rescaled so that (Sigma + R)_ii = Sigma_ii, and support
/// pairs with infinite bounds get R_ij = 0. Equal to W - Sigma otherwise.
SymmetricMatrix feasible_dual_point(const SymmetricMatrix& sigma, const SymmetricMatrix& w,
                                    const Support& z, const Regularizer& reg);

/// R = W - Sigma with R_ij = 0 on the diagonal and support entries whose box
/// is inactive at theta. Dual feasible whenever Sigma + R is positive definite;
/// at the optimum this is the max-determinant completion certificate.
SymmetricMatrix completion_dual_point(const SymmetricMatrix& sigma, const SymmetricMatrix& w,
                                      const SymmetricMatrix& theta, const Support& z,
                                      const BigM& reg);

/// p + log det(Sigma + R) - sum over the diagonal and both triangles of the
/// support of Omega_ij^*(R_ij). A lower bound on the covariance-selection
/// value for every R with Sigma + R positive definite.
double dual_value(const SymmetricMatrix& sigma, const SymmetricMatrix& r, const Support& z,
                  const Regularizer& reg);

}  // namespace certprec
