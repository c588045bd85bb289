#pragma once

// Model selection around the exact solver: base scales for the regularization
// grid, EBIC and hold-out likelihood scores, node-wise lasso warm starts and
// the grid search over (k, multiplier).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "certprec/cutplane.hpp"
#include "certprec/error.hpp"
#include "certprec/linalg.hpp"
#include "certprec/regularizer.hpp"
#include "certprec/structure.hpp"
#include "certprec/support.hpp"

namespace certprec {

/// Row-major n x p data matrix.
struct DataMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// (1/n) sum_t (x_t - mean)(x_t - mean)^T. Needs at least one row.
SymmetricMatrix sample_covariance(const DataMatrix& x);

/// Diagonal scaling D^{-1/2} S D^{-1/2} with D = diag(scale_from).
SymmetricMatrix standardize(const SymmetricMatrix& s, const SymmetricMatrix& scale_from);

struct BaseScales {
  double m0 = 0.0;      // p / ||Sigma||_1
  double gamma0 = 0.0;  // 4 p / ||Sigma||_2^2
};

/// Entrywise norms. Throws kInvalidInput on a zero matrix.
BaseScales base_scales(const SymmetricMatrix& sigma);

/// Number of strictly lower-triangular entries with |value| > 1e-10.
std::size_t offdiag_nonzeros(const SymmetricMatrix& theta);

/// n [<Sigma, Theta> - log det Theta] + ||Theta||_0 (log n + 2 log p).
double ebic(const SymmetricMatrix& theta, const SymmetricMatrix& sigma_train, std::size_t n,
            std::size_t p);

/// <Sigma_eval, Theta> - log det Theta.
double holdout_nll(const SymmetricMatrix& theta, const SymmetricMatrix& sigma_eval);

struct LassoPath {
  double ratio = 0.9;          // lambda_{t+1} = ratio * lambda_t
  double min_fraction = 1e-4;  // stop below min_fraction * lambda_max
  double tol = 1e-9;
  std::size_t max_sweeps = 1000;
};

/// Meinshausen-Buhlmann neighborhood selection on the correlation matrix:
/// node-wise lasso along a decreasing lambda path until the OR-union of the
/// selected pairs has at least k pairs; keeps the k pairs with the largest
/// |beta_ij| + |beta_ji| (ties lexicographic), filling from the largest
/// |correlation| pairs when the path never gets there.
Support warm_start(const SymmetricMatrix& sigma, std::size_t k, const LassoPath& path = {});

enum class Criterion { kEbic, kHoldoutNll };
enum class RegKind { kBigM, kRidge };

const char* to_string(Criterion c);
const char* to_string(RegKind r);

/// Uniform big-M at multiplier * M0 (diagonal unbounded) or ridge at
/// multiplier * gamma0.
Regularizer scaled_regularizer(RegKind kind, const SymmetricMatrix& sigma, double multiplier);

struct TuningGrid {
  std::vector<std::size_t> k_values;  // strictly decreasing
  std::vector<double> multipliers{1.0, 2.0, 4.0, 8.0, 16.0};
  Criterion criterion = Criterion::kHoldoutNll;
};

struct TuningData {
  SymmetricMatrix sigma_train;
  std::size_t n_train = 0;
  std::optional<SymmetricMatrix> sigma_val;  // required for kHoldoutNll
};

struct GridCell {
  std::size_t k = 0;
  double multiplier = 0.0;
  bool ok = false;
  std::string error;
  ErrorKind error_kind = ErrorKind::kInvalidInput;
  double criterion = 0.0;
  SolveResult result;
};

struct TunedModel {
  std::size_t k = 0;
  double multiplier = 0.0;
  Regularizer reg;
  double criterion = 0.0;
  SolveResult result;
  std::vector<GridCell> grid;  // multiplier-major, k in grid order
};

/// One solve_path per multiplier (cuts reused along k); cells that fail are
/// recorded and skipped, and if every cell fails the first error is rethrown.
/// Argmin ties go to the smaller k, then the smaller multiplier. Multipliers
/// run on up to `threads` threads; results do not depend on the thread count.
TunedModel tune(const TuningData& data, const TuningGrid& grid, RegKind kind,
                const SolveOptions& options, const Constraints& structural = {},
                std::size_t threads = 1);

/// Columns: k, reg_multiplier, objective, lower_bound, gap, criterion, time_s, cuts.
std::string grid_to_csv(std::span<const GridCell> cells);

}  // namespace certprec
