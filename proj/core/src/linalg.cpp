#include "certprec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "certprec/error.hpp"

namespace certprec {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "InvalidInput";
    case ErrorKind::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::kSingularUpdate: return "SingularUpdate";
    case ErrorKind::kInfeasible: return "Infeasible";
    case ErrorKind::kDegenerateInstance: return "DegenerateInstance";
  }
  return "Unknown";
}

SymmetricMatrix::SymmetricMatrix(std::size_t dim) : dim_(dim), data_(dim * dim, 0.0) {}

SymmetricMatrix SymmetricMatrix::identity(std::size_t dim) {
  SymmetricMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m.data_[i * dim + i] = 1.0;
  return m;
}

SymmetricMatrix SymmetricMatrix::diagonal(std::span<const double> diag) {
  SymmetricMatrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m.set(i, i, diag[i]);
  return m;
}

SymmetricMatrix SymmetricMatrix::from_dense(std::size_t dim, std::span<const double> rows,
                                            double tol) {
  if (rows.size() != dim * dim) {
    fail(ErrorKind::kInvalidInput, "from_dense: expected " + std::to_string(dim * dim) +
                                       " entries, got " + std::to_string(rows.size()));
  }
  SymmetricMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      const double a = rows[i * dim + j];
      const double b = rows[j * dim + i];
      if (!std::isfinite(a) || !std::isfinite(b)) {
        fail(ErrorKind::kInvalidInput, "from_dense: non-finite entry at (" +
                                           std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (std::abs(a - b) > tol) {
        std::ostringstream os;
        os << "from_dense: asymmetric entries (" << i << "," << j << ")=" << a << " vs " << b;
        fail(ErrorKind::kInvalidInput, os.str());
      }
      m.set(i, j, i == j ? a : 0.5 * (a + b));
    }
  }
  return m;
}

void SymmetricMatrix::mirror_upper() noexcept {
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = i + 1; j < dim_; ++j) data_[j * dim_ + i] = data_[i * dim_ + j];
  }
}

bool SymmetricMatrix::is_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

SymmetricMatrix& SymmetricMatrix::operator*=(double c) noexcept {
  for (double& v : data_) v *= c;
  return *this;
}

SymmetricMatrix& SymmetricMatrix::operator+=(const SymmetricMatrix& other) {
  if (other.dim_ != dim_) fail(ErrorKind::kInvalidInput, "dimension mismatch in +=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

SymmetricMatrix& SymmetricMatrix::operator-=(const SymmetricMatrix& other) {
  if (other.dim_ != dim_) fail(ErrorKind::kInvalidInput, "dimension mismatch in -=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

SymmetricMatrix operator+(SymmetricMatrix a, const SymmetricMatrix& b) { return a += b; }
SymmetricMatrix operator-(SymmetricMatrix a, const SymmetricMatrix& b) { return a -= b; }
SymmetricMatrix operator*(double c, SymmetricMatrix a) { return a *= c; }

double inner(const SymmetricMatrix& a, const SymmetricMatrix& b) {
  if (a.dim() != b.dim()) fail(ErrorKind::kInvalidInput, "dimension mismatch in inner");
  double s = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t k = 0; k < da.size(); ++k) s += da[k] * db[k];
  return s;
}

double norm_l1(const SymmetricMatrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += std::abs(v);
  return s;
}

double norm_l2(const SymmetricMatrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double norm_max(const SymmetricMatrix& a) {
  double s = 0.0;
  for (double v : a.data()) s = std::max(s, std::abs(v));
  return s;
}

double identity_residual(const SymmetricMatrix& a, const SymmetricMatrix& b) {
  const std::size_t p = a.dim();
  double worst = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < p; ++j) {
      // b is symmetric, so column j of b is row j.
      const auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) s += ai[k] * bj[k];
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

CholeskyFactor cholesky(const SymmetricMatrix& a) {
  const std::size_t p = a.dim();
  CholeskyFactor f;
  f.dim_ = p;
  f.lower_.assign(p * p, 0.0);
  double max_diag = 0.0;
  for (std::size_t i = 0; i < p; ++i) max_diag = std::max(max_diag, a(i, i));
  const double threshold = static_cast<double>(p) * 1e-14 * max_diag;
  double* l = f.lower_.data();
  for (std::size_t i = 0; i < p; ++i) {
    double* li = l + i * p;
    for (std::size_t j = 0; j < i; ++j) {
      const double* lj = l + j * p;
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      li[j] = s / lj[j];
    }
    double d = a(i, i);
    for (std::size_t k = 0; k < i; ++k) d -= li[k] * li[k];
    if (!(d > threshold)) {
      std::ostringstream os;
      os << "cholesky: pivot " << d << " at index " << i << " below threshold " << threshold;
      fail(ErrorKind::kNotPositiveDefinite, os.str());
    }
    li[i] = std::sqrt(d);
  }
  return f;
}

void CholeskyFactor::solve_in_place(std::span<double> b) const {
  const std::size_t p = dim_;
  for (std::size_t i = 0; i < p; ++i) {
    const double* li = lower_.data() + i * p;
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= li[k] * b[k];
    b[i] = s / li[i];
  }
  for (std::size_t ii = p; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < p; ++k) s -= lower_[k * p + ii] * b[k];
    b[ii] = s / lower_[ii * p + ii];
  }
}

SymmetricMatrix CholeskyFactor::reconstruct() const {
  const std::size_t p = dim_;
  SymmetricMatrix m(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k <= j; ++k) s += lower_[i * p + k] * lower_[j * p + k];
      m.set(i, j, s);
    }
  }
  return m;
}

double log_det(const CholeskyFactor& factor) {
  double s = 0.0;
  for (std::size_t i = 0; i < factor.dim(); ++i) s += std::log(factor(i, i));
  return 2.0 * s;
}

SymmetricMatrix inverse_from_factor(const CholeskyFactor& factor) {
  const std::size_t p = factor.dim();
  // U = L^{-T} stored row-major as upper triangular; A^{-1} = U U^T.
  std::vector<double> u(p * p, 0.0);
  std::vector<double> col(p);
  for (std::size_t c = 0; c < p; ++c) {
    // Column c of L^{-1}: forward solve L x = e_c, x_r = 0 for r < c.
    std::fill(col.begin(), col.end(), 0.0);
    col[c] = 1.0 / factor(c, c);
    for (std::size_t r = c + 1; r < p; ++r) {
      double s = 0.0;
      for (std::size_t k = c; k < r; ++k) s -= factor(r, k) * col[k];
      col[r] = s / factor(r, r);
    }
    // Row c of U = column c of L^{-1}.
    for (std::size_t r = c; r < p; ++r) u[c * p + r] = col[r];
  }
  SymmetricMatrix inv(p);
  double* out = inv.upper_data();
  for (std::size_t i = 0; i < p; ++i) {
    const double* ui = u.data() + i * p;
    for (std::size_t j = i; j < p; ++j) {
      const double* uj = u.data() + j * p;
      double s = 0.0;
      for (std::size_t k = j; k < p; ++k) s += ui[k] * uj[k];
      out[i * p + j] = s;
    }
  }
  inv.mirror_upper();
  return inv;
}

SymmetricMatrix inverse_spd(const SymmetricMatrix& a) { return inverse_from_factor(cholesky(a)); }

double det_ratio(const SymmetricMatrix& w, std::size_t i, std::size_t j, double t) {
  if (i == j) return 1.0 + 2.0 * w(i, i) * t;
  const double wij = w(i, j);
  return 1.0 + 2.0 * wij * t + (wij * wij - w(i, i) * w(j, j)) * t * t;
}

void rank_two_update_inverse_in_place(SymmetricMatrix& w, std::size_t i, std::size_t j,
                                      double t) {
  if (t == 0.0) return;
  const std::size_t p = w.dim();
  const double d = det_ratio(w, i, j, t);
  if (!(d > 0.0)) {
    std::ostringstream os;
    os << "rank-two update (" << i << "," << j << ") with t=" << t
       << " leaves the cone: det ratio " << d;
    fail(ErrorKind::kSingularUpdate, os.str());
  }
  std::vector<double> wi(w.row(i).begin(), w.row(i).end());
  double* out = w.upper_data();
  if (i == j) {
    // Theta + 2t e_i e_i^T.
    const double s = 2.0 * t / d;
    for (std::size_t r = 0; r < p; ++r) {
      const double a = s * wi[r];
      double* row = out + r * p;
      for (std::size_t c = r; c < p; ++c) row[c] -= a * wi[c];
    }
    w.mirror_upper();
    return;
  }
  // W' = W - (t/d) [ -t W_jj w_i w_i^T + (1 + t W_ij)(w_i w_j^T + w_j w_i^T) - t W_ii w_j w_j^T ]
  std::vector<double> wj(w.row(j).begin(), w.row(j).end());
  const double s = t / d;
  const double cii = -s * t * wj[j];
  const double cij = s * (1.0 + t * wi[j]);
  const double cjj = -s * t * wi[i];
  for (std::size_t r = 0; r < p; ++r) {
    const double ar = cii * wi[r] + cij * wj[r];
    const double br = cij * wi[r] + cjj * wj[r];
    double* row = out + r * p;
    for (std::size_t c = r; c < p; ++c) row[c] -= ar * wi[c] + br * wj[c];
  }
  w.mirror_upper();
}

SymmetricMatrix rank_two_update_inverse(const SymmetricMatrix& w, std::size_t i, std::size_t j,
                                        double t) {
  SymmetricMatrix out = w;
  rank_two_update_inverse_in_place(out, i, j, t);
  return out;
}

InverseTracker::InverseTracker(SymmetricMatrix theta, std::size_t refresh_every)
    : theta_(std::move(theta)), refresh_every_(std::max<std::size_t>(1, refresh_every)) {
  refresh();
  refreshes_ = 0;
}

double InverseTracker::update(std::size_t i, std::size_t j, double t) {
  const double ratio = det_ratio(w_, i, j, t);
  rank_two_update_inverse_in_place(w_, i, j, t);
  theta_.add(i, j, i == j ? 2.0 * t : t);
  log_det_ += std::log(ratio);
  ++updates_;
  if (++since_refresh_ >= refresh_every_) refresh();
  return ratio;
}

void InverseTracker::refresh() {
  const CholeskyFactor f = cholesky(theta_);
  w_ = inverse_from_factor(f);
  log_det_ = certprec::log_det(f);
  since_refresh_ = 0;
  ++refreshes_;
}

}  // namespace certprec
