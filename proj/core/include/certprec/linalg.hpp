#pragma once

// Dense symmetric positive-definite linear algebra: Cholesky, log-determinant,
// inversion and O(p^2) maintenance of an inverse under symmetric rank-two
// coordinate updates.

#include <cstddef>
#include <span>
#include <vector>

namespace certprec {

/// Dense p x p symmetric matrix stored row-major with both triangles kept.
/// Writes go through set()/add(), which mirror the entry, so the storage is
/// exactly symmetric at all times.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(std::size_t dim);

  static SymmetricMatrix identity(std::size_t dim);
  static SymmetricMatrix diagonal(std::span<const double> diag);

  /// Builds from full row-major data. Entries must be finite and the matrix
  /// symmetric within `tol` (absolute); the two triangles are averaged.
  static SymmetricMatrix from_dense(std::size_t dim, std::span<const double> rows,
                                    double tol = 0.0);

  std::size_t dim() const noexcept { return dim_; }

  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * dim_ + j];
  }
  void set(std::size_t i, std::size_t j, double v) noexcept {
    data_[i * dim_ + j] = v;
    data_[j * dim_ + i] = v;
  }
  void add(std::size_t i, std::size_t j, double v) noexcept {
    data_[i * dim_ + j] += v;
    if (i != j) data_[j * dim_ + i] += v;
  }

  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<const double> data() const noexcept { return data_; }

  /// Restores exact mirroring after a caller wrote only the upper triangle
  /// through upper_data().
  double* upper_data() noexcept { return data_.data(); }
  void mirror_upper() noexcept;

  bool is_finite() const noexcept;

  SymmetricMatrix& operator*=(double c) noexcept;
  SymmetricMatrix& operator+=(const SymmetricMatrix& other);
  SymmetricMatrix& operator-=(const SymmetricMatrix& other);

  friend bool operator==(const SymmetricMatrix&, const SymmetricMatrix&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

SymmetricMatrix operator+(SymmetricMatrix a, const SymmetricMatrix& b);
SymmetricMatrix operator-(SymmetricMatrix a, const SymmetricMatrix& b);
SymmetricMatrix operator*(double c, SymmetricMatrix a);

/// Frobenius inner product <A, B> = sum_ij A_ij B_ij.
double inner(const SymmetricMatrix& a, const SymmetricMatrix& b);
/// Entrywise norms (matrices treated as vectors).
double norm_l1(const SymmetricMatrix& a);
double norm_l2(const SymmetricMatrix& a);
double norm_max(const SymmetricMatrix& a);
/// max_ij |(A B - I)_ij|, with A and B dense products.
double identity_residual(const SymmetricMatrix& a, const SymmetricMatrix& b);

/// Lower-triangular Cholesky factor with strictly positive diagonal.
class CholeskyFactor {
 public:
  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return j <= i ? lower_[i * dim_ + j] : 0.0;
  }

  /// Solves A x = b in place.
  void solve_in_place(std::span<double> b) const;
  SymmetricMatrix reconstruct() const;

 private:
  friend CholeskyFactor cholesky(const SymmetricMatrix& a);
  std::size_t dim_ = 0;
  std::vector<double> lower_;
};

/// Throws Error(kNotPositiveDefinite) when a pivot falls to or below
/// p * 1e-14 * max_i A_ii.
CholeskyFactor cholesky(const SymmetricMatrix& a);

/// 2 * sum_i log L_ii.
double log_det(const CholeskyFactor& factor);

SymmetricMatrix inverse_from_factor(const CholeskyFactor& factor);
SymmetricMatrix inverse_spd(const SymmetricMatrix& a);

/// det(Theta + Delta) / det(Theta) for Delta = t (e_i e_j^T + e_j e_i^T),
/// given W = Theta^{-1}. For i == j this is 1 + 2 W_ii t.
double det_ratio(const SymmetricMatrix& w, std::size_t i, std::size_t j, double t);

/// (Theta + t (e_i e_j^T + e_j e_i^T))^{-1} from W = Theta^{-1} in O(p^2),
/// through the symmetric 2x2 block Woodbury identity. Throws
/// Error(kSingularUpdate) when det_ratio <= 0.
SymmetricMatrix rank_two_update_inverse(const SymmetricMatrix& w, std::size_t i,
                                        std::size_t j, double t);
/// In-place variant of the above.
void rank_two_update_inverse_in_place(SymmetricMatrix& w, std::size_t i, std::size_t j,
                                      double t);

/// Keeps Theta, W = Theta^{-1} and log det Theta consistent across a stream of
/// coordinate updates. W is refreshed from a fresh factorization every
/// `refresh_every` applied updates to bound Sherman-Morrison drift.
class InverseTracker {
 public:
  InverseTracker(SymmetricMatrix theta, std::size_t refresh_every = 500);

  const SymmetricMatrix& theta() const noexcept { return theta_; }
  const SymmetricMatrix& inverse() const noexcept { return w_; }
  double log_det() const noexcept { return log_det_; }
  std::size_t updates() const noexcept { return updates_; }
  std::size_t refreshes() const noexcept { return refreshes_; }

  /// Theta += t (e_i e_j^T + e_j e_i^T). Returns the determinant ratio.
  double update(std::size_t i, std::size_t j, double t);
  /// Recomputes W and log det Theta from scratch.
  void refresh();

 private:
  SymmetricMatrix theta_;
  SymmetricMatrix w_;
  double log_det_ = 0.0;
  std::size_t refresh_every_;
  std::size_t updates_ = 0;
  std::size_t since_refresh_ = 0;
  std::size_t refreshes_ = 0;
};

}  // namespace certprec
