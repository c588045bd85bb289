#include "certprec/bigm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "certprec/error.hpp"

namespace certprec {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_pair(std::size_t p, std::size_t i, std::size_t j) {
  if (i == j || i >= p || j >= p) {
    fail(ErrorKind::kInvalidInput, "bounds need an off-diagonal pair inside the matrix");
  }
}

}  // namespace

double level_from_feasible(const SymmetricMatrix& sigma, const SymmetricMatrix& theta_hat) {
  if (sigma.dim() != theta_hat.dim()) fail(ErrorKind::kInvalidInput, "dimension mismatch");
  return inner(sigma, theta_hat) - log_det(cholesky(theta_hat));
}

double ScalarDual::domain_start() const {
  // Largest root of lambda^2 + a lambda + b; b <= 0 whenever Sigma > 0.
  const double disc = std::max(0.0, a * a - 4.0 * b);
  return std::max(0.0, 0.5 * (-a + std::sqrt(disc)));
}

double ScalarDual::value(double lambda) const {
  const double x = a / lambda + b / (lambda * lambda);
  if (!(x > -1.0)) return -kInf;
  return lambda * (c + std::log1p(x));
}

double ScalarDual::derivative(double lambda) const {
  const double l2 = lambda * lambda;
  const double x = a / lambda + b / l2;
  if (!(x > -1.0)) return kInf;
  const double q = 1.0 + x;
  const double dq = -a / l2 - 2.0 * b / (l2 * lambda);
  return c + std::log1p(x) + lambda * dq / q;
}

double ScalarDual::second_derivative(double lambda) const {
  const double l2 = lambda * lambda;
  const double q = 1.0 + a / lambda + b / l2;
  const double dq = -a / l2 - 2.0 * b / (l2 * lambda);
  const double ddq = 2.0 * a / (l2 * lambda) + 6.0 * b / (l2 * l2);
  return 2.0 * dq / q + lambda * ddq / q - lambda * dq * dq / (q * q);
}

double ScalarDual::maximize(double tol) const {
  if (c >= 0.0) return a;
  const double start = domain_start();
  double lo = start;
  double hi = std::max(1.0, 2.0 * start + 1.0);
  double best = -kInf;
  for (int n = 0; n < 200 && derivative(hi) > 0.0; ++n) {
    best = std::max(best, value(hi));
    lo = hi;
    hi *= 2.0;
  }
  double lambda = std::clamp(1.0, lo, hi);
  if (!(lambda > lo && lambda < hi)) lambda = 0.5 * (lo + hi);
  for (int n = 0; n < 200; ++n) {
    const double g = value(lambda);
    best = std::max(best, g);
    const double d1 = derivative(lambda);
    if (d1 > 0.0) {
      lo = lambda;
    } else {
      hi = lambda;
    }
    if (std::abs(d1) * lambda <= tol * std::max(1.0, std::abs(g)) || hi - lo <= tol * hi) break;
    const double d2 = second_derivative(lambda);
    double next = d2 < 0.0 ? lambda - d1 / d2 : -1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    lambda = next;
  }
  best = std::max(best, value(lambda));
  return best;
}

BoundOracle::BoundOracle(const SymmetricMatrix& sigma) {
  const CholeskyFactor f = cholesky(sigma);
  log_det_ = log_det(f);
  inverse_ = inverse_from_factor(f);
}

ScalarDual BoundOracle::lower_dual(double u, std::size_t i, std::size_t j) const {
  const std::size_t p = dim();
  check_pair(p, i, j);
  const SymmetricMatrix& t = inverse_;
  ScalarDual g;
  g.c = static_cast<double>(p) - u + log_det_;
  g.a = t(i, j);
  g.b = 0.25 * (t(i, j) * t(i, j) - t(i, i) * t(j, j));
  return g;
}

EntryBounds BoundOracle::entry(double u, std::size_t i, std::size_t j, double newton_tol) const {
  ScalarDual g = lower_dual(u, i, j);
  EntryBounds out;
  out.pair = make_pair_sorted(i, j);
  out.level = u;
  out.lower = g.maximize(newton_tol);
  // max Theta_ij = -min(-Theta_ij): flip the direction of the perturbation.
  g.a = -g.a;
  out.upper = -g.maximize(newton_tol);
  if (out.lower > out.upper) out.lower = out.upper = 0.5 * (out.lower + out.upper);
  return out;
}

std::vector<EntryBounds> BoundOracle::all_pairs(double u, double newton_tol) const {
  const std::size_t p = dim();
  std::vector<EntryBounds> out;
  out.reserve(pair_count(p));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) out.push_back(entry(u, i, j, newton_tol));
  }
  return out;
}

EntryBounds entry_bounds(const SymmetricMatrix& sigma, double u, std::size_t i, std::size_t j,
                         double newton_tol) {
  return BoundOracle(sigma).entry(u, i, j, newton_tol);
}

double dual_objective_dense(const SymmetricMatrix& sigma, double u, std::size_t i,
                            std::size_t j, double lambda) {
  const std::size_t p = sigma.dim();
  check_pair(p, i, j);
  SymmetricMatrix m = sigma;
  m.add(i, j, 1.0 / (2.0 * lambda));
  return lambda * (static_cast<double>(p) - u + log_det(cholesky(m)));
}

BigM bounds_to_bigm(std::span<const EntryBounds> bounds, std::size_t p, double inflation) {
  if (!(inflation >= 1.0)) fail(ErrorKind::kInvalidInput, "inflation must be >= 1");
  BigM reg = BigM::uniform(p, 1e-8);
  for (const EntryBounds& b : bounds) {
    if (b.pair.i >= p || b.pair.j >= p) fail(ErrorKind::kInvalidInput, "bound pair out of range");
    const double m = inflation * std::max(std::abs(b.lower), std::abs(b.upper));
    reg.bounds.set(b.pair.i, b.pair.j, std::max(m, 1e-8));
  }
  return reg;
}

double diagonal_level(const SymmetricMatrix& sigma) {
  const std::size_t p = sigma.dim();
  double level = static_cast<double>(p);
  for (std::size_t i = 0; i < p; ++i) {
    if (!(sigma(i, i) > 0.0)) fail(ErrorKind::kNotPositiveDefinite, "zero or negative variance");
    level += std::log(sigma(i, i));
  }
  return level;
}

BigM default_bigm(const SymmetricMatrix& sigma, double inflation) {
  const BoundOracle oracle(sigma);
  const auto bounds = oracle.all_pairs(diagonal_level(sigma));
  return bounds_to_bigm(bounds, sigma.dim(), inflation);
}

SymmetricMatrix shifted_covariance(const SymmetricMatrix& sigma, double relative_shift) {
  const std::size_t p = sigma.dim();
  double mean = 0.0;
  for (std::size_t i = 0; i < p; ++i) mean += sigma(i, i);
  mean /= static_cast<double>(std::max<std::size_t>(p, 1));
  SymmetricMatrix out = sigma;
  for (std::size_t i = 0; i < p; ++i) out.add(i, i, relative_shift * mean);
  return out;
}

}  // namespace certprec
