#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <variant>

#include "certprec/linalg.hpp"

namespace certprec {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Box constraints |Theta_ij| <= M_ij. Diagonal bounds may be +inf.
struct BigM {
  SymmetricMatrix bounds;

  /// Off-diagonal bound `m` everywhere, diagonal bound `diag`.
  static BigM uniform(std::size_t p, double m, double diag = kUnbounded);
};

/// Penalty (1 / (2 gamma)) * sum_ij Theta_ij^2, diagonal included.
struct Ridge {
  double gamma = 1.0;
};

using Regularizer = std::variant<BigM, Ridge>;

/// Throws Error(kInvalidInput) when the regularizer violates its invariants
/// or does not match dimension p.
void validate(const Regularizer& reg, std::size_t p);

std::string describe(const Regularizer& reg);

/// Omega_ij^*(r): M_ij |r| for big-M (with 0 * inf = 0), (gamma / 2) r^2 for ridge.
double conjugate(const Regularizer& reg, std::size_t i, std::size_t j, double r);

/// Entrywise conjugate weights Omega^*(R).
SymmetricMatrix conjugate_weights(const SymmetricMatrix& r, const Regularizer& reg);

/// Omega(Theta): 0 or +inf for big-M, the ridge penalty otherwise.
double penalty(const Regularizer& reg, const SymmetricMatrix& theta);

}  // namespace certprec
