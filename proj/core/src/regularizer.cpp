#include "certprec/regularizer.hpp"

#include <cmath>
#include <sstream>

#include "certprec/error.hpp"

namespace certprec {

BigM BigM::uniform(std::size_t p, double m, double diag) {
  BigM b{SymmetricMatrix(p)};
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) b.bounds.set(i, j, i == j ? diag : m);
  }
  return b;
}

void validate(const Regularizer& reg, std::size_t p) {
  if (const auto* r = std::get_if<Ridge>(&reg)) {
    if (!(r->gamma > 0.0) || !std::isfinite(r->gamma)) {
      fail(ErrorKind::kInvalidInput, "ridge gamma must be positive and finite");
    }
    return;
  }
  const auto& m = std::get<BigM>(reg).bounds;
  if (m.dim() != p) fail(ErrorKind::kInvalidInput, "big-M bound matrix has wrong dimension");
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      if (std::isnan(m(i, j)) || !(m(i, j) > 0.0)) {
        fail(ErrorKind::kInvalidInput, "big-M bounds must be strictly positive");
      }
    }
  }
}

std::string describe(const Regularizer& reg) {
  std::ostringstream os;
  os.precision(17);
  if (const auto* r = std::get_if<Ridge>(&reg)) {
    os << "ridge(gamma=" << r->gamma << ")";
  } else {
    const auto& m = std::get<BigM>(reg).bounds;
    double lo = kUnbounded, hi = 0.0;
    for (std::size_t i = 0; i < m.dim(); ++i) {
      for (std::size_t j = i + 1; j < m.dim(); ++j) {
        lo = std::min(lo, m(i, j));
        hi = std::max(hi, m(i, j));
      }
    }
    if (m.dim() < 2) lo = hi = 0.0;
    os << "bigm(min=" << lo << ",max=" << hi << ")";
  }
  return os.str();
}

double conjugate(const Regularizer& reg, std::size_t i, std::size_t j, double r) {
  if (const auto* ridge = std::get_if<Ridge>(&reg)) return 0.5 * ridge->gamma * r * r;
  if (r == 0.0) return 0.0;
  return std::get<BigM>(reg).bounds(i, j) * std::abs(r);
}

SymmetricMatrix conjugate_weights(const SymmetricMatrix& r, const Regularizer& reg) {
  const std::size_t p = r.dim();
  SymmetricMatrix out(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) out.set(i, j, conjugate(reg, i, j, r(i, j)));
  }
  return out;
}

double penalty(const Regularizer& reg, const SymmetricMatrix& theta) {
  if (const auto* ridge = std::get_if<Ridge>(&reg)) {
    const double n = norm_l2(theta);
    return n * n / (2.0 * ridge->gamma);
  }
  const auto& m = std::get<BigM>(reg).bounds;
  for (std::size_t i = 0; i < theta.dim(); ++i) {
    for (std::size_t j = i; j < theta.dim(); ++j) {
      // Small slack absorbs round-off from clamped updates.
      if (std::abs(theta(i, j)) > m(i, j) * (1.0 + 1e-12)) return kUnbounded;
    }
  }
  return 0.0;
}

}  // namespace certprec
