#include "certprec/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "certprec/error.hpp"
#include "certprec/io.hpp"

namespace certprec {
namespace {

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

// Lasso of node i on the others in covariance form,
// min 1/2 b^T C b - c_i^T b + lambda |b|_1 over b with b_i = 0, warm-started
// from `beta` (row i of the coefficient matrix).
void lasso_node(const SymmetricMatrix& c, std::size_t i, double lambda, const LassoPath& opts,
                std::vector<double>& beta, std::vector<double>& resid) {
  const std::size_t p = c.dim();
  for (std::size_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (j == i) continue;
      const double cjj = c(j, j);
      const double z = resid[j] + cjj * beta[j];
      const double next = soft_threshold(z, lambda) / cjj;
      const double delta = next - beta[j];
      if (delta == 0.0) continue;
      beta[j] = next;
      const auto row = c.row(j);
      for (std::size_t l = 0; l < p; ++l) resid[l] -= row[l] * delta;
      max_delta = std::max(max_delta, std::abs(delta));
    }
    if (max_delta <= opts.tol) break;
  }
}

std::vector<std::size_t> top_pairs_by(const std::vector<double>& score, std::size_t k) {
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

}  // namespace

SymmetricMatrix sample_covariance(const DataMatrix& x) {
  if (x.rows == 0 || x.cols == 0) fail(ErrorKind::kInvalidInput, "sample covariance needs data");
  const std::size_t n = x.rows, p = x.cols;
  std::vector<double> mean(p, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) mean[c] += x(r, c);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  SymmetricMatrix s(p);
  double* u = s.upper_data();
  std::vector<double> centered(p);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) centered[c] = x(r, c) - mean[c];
    for (std::size_t a = 0; a < p; ++a) {
      const double va = centered[a];
      for (std::size_t b = a; b < p; ++b) u[a * p + b] += va * centered[b];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) u[a * p + b] *= inv_n;
  }
  s.mirror_upper();
  return s;
}

SymmetricMatrix standardize(const SymmetricMatrix& s, const SymmetricMatrix& scale_from) {
  const std::size_t p = s.dim();
  if (scale_from.dim() != p) fail(ErrorKind::kInvalidInput, "standardize: dimension mismatch");
  std::vector<double> d(p);
  for (std::size_t i = 0; i < p; ++i) {
    if (!(scale_from(i, i) > 0.0)) {
      fail(ErrorKind::kInvalidInput, "standardize: variable " + std::to_string(i) + " has zero variance");
    }
    d[i] = 1.0 / std::sqrt(scale_from(i, i));
  }
  SymmetricMatrix out(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) out.set(i, j, s(i, j) * d[i] * d[j]);
  }
  return out;
}

BaseScales base_scales(const SymmetricMatrix& sigma) {
  const double l1 = norm_l1(sigma);
  const double l2 = norm_l2(sigma);
  if (!(l1 > 0.0)) fail(ErrorKind::kInvalidInput, "base scales need a nonzero matrix");
  const double p = static_cast<double>(sigma.dim());
  return BaseScales{p / l1, 4.0 * p / (l2 * l2)};
}

std::size_t offdiag_nonzeros(const SymmetricMatrix& theta) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < theta.dim(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(theta(i, j)) > 1e-10) ++count;
    }
  }
  return count;
}

double holdout_nll(const SymmetricMatrix& theta, const SymmetricMatrix& sigma_eval) {
  if (theta.dim() != sigma_eval.dim()) fail(ErrorKind::kInvalidInput, "dimension mismatch");
  return inner(sigma_eval, theta) - log_det(cholesky(theta));
}

double ebic(const SymmetricMatrix& theta, const SymmetricMatrix& sigma_train, std::size_t n,
            std::size_t p) {
  if (n == 0 || p == 0) fail(ErrorKind::kInvalidInput, "ebic needs n, p > 0");
  const double nn = static_cast<double>(n);
  const double nnz = static_cast<double>(offdiag_nonzeros(theta));
  return nn * holdout_nll(theta, sigma_train) +
         nnz * (std::log(nn) + 2.0 * std::log(static_cast<double>(p)));
}

Support warm_start(const SymmetricMatrix& sigma, std::size_t k, const LassoPath& path) {
  const std::size_t p = sigma.dim();
  const std::size_t total = pair_count(p);
  k = std::min(k, total);
  if (k == 0) return Support(p);
  if (!(path.ratio > 0.0 && path.ratio < 1.0)) {
    fail(ErrorKind::kInvalidInput, "lasso path ratio must lie in (0, 1)");
  }
  const SymmetricMatrix c = standardize(sigma, sigma);
  PairTable table(p);

  double lambda_max = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) lambda_max = std::max(lambda_max, std::abs(c(i, j)));
  }

  std::vector<std::vector<double>> beta(p, std::vector<double>(p, 0.0));
  std::vector<std::vector<double>> resid(p);
  for (std::size_t i = 0; i < p; ++i) {
    resid[i].assign(c.row(i).begin(), c.row(i).end());
  }
  std::vector<double> magnitude(total, 0.0);
  std::size_t selected = 0;
  if (lambda_max > 0.0) {
    for (double lambda = lambda_max * path.ratio; lambda >= lambda_max * path.min_fraction;
         lambda *= path.ratio) {
      for (std::size_t i = 0; i < p; ++i) lasso_node(c, i, lambda, path, beta[i], resid[i]);
      selected = 0;
      for (std::size_t e = 0; e < total; ++e) {
        const Pair& pr = table[e];
        magnitude[e] = std::abs(beta[pr.i][pr.j]) + std::abs(beta[pr.j][pr.i]);
        if (magnitude[e] > 0.0) ++selected;
      }
      if (selected >= k) break;
    }
  }

  std::vector<std::size_t> chosen;
  for (const std::size_t e : top_pairs_by(magnitude, k)) {
    if (magnitude[e] > 0.0) chosen.push_back(e);
  }
  if (chosen.size() < k) {
    // Fill from the strongest correlations not selected by the lasso.
    std::vector<double> corr(total, -1.0);
    for (std::size_t e = 0; e < total; ++e) {
      if (magnitude[e] == 0.0) corr[e] = std::abs(c(table[e].i, table[e].j));
    }
    for (const std::size_t e : top_pairs_by(corr, k - chosen.size())) chosen.push_back(e);
  }
  return Support::from_indices(p, chosen);
}

const char* to_string(Criterion c) {
  return c == Criterion::kEbic ? "ebic" : "holdout_nll";
}

const char* to_string(RegKind r) { return r == RegKind::kBigM ? "bigm" : "ridge"; }

Regularizer scaled_regularizer(RegKind kind, const SymmetricMatrix& sigma, double multiplier) {
  if (!(multiplier > 0.0)) fail(ErrorKind::kInvalidInput, "multiplier must be > 0");
  const BaseScales s = base_scales(sigma);
  if (kind == RegKind::kBigM) return BigM::uniform(sigma.dim(), multiplier * s.m0);
  return Ridge{multiplier * s.gamma0};
}

TunedModel tune(const TuningData& data, const TuningGrid& grid, RegKind kind,
                const SolveOptions& options, const Constraints& structural, std::size_t threads) {
  if (grid.k_values.empty() || grid.multipliers.empty()) {
    fail(ErrorKind::kInvalidInput, "tuning grid is empty");
  }
  for (std::size_t t = 1; t < grid.k_values.size(); ++t) {
    if (!(grid.k_values[t] < grid.k_values[t - 1])) {
      fail(ErrorKind::kInvalidInput, "grid k values must be strictly decreasing");
    }
  }
  for (double m : grid.multipliers) {
    if (!(m > 0.0)) fail(ErrorKind::kInvalidInput, "grid multipliers must be > 0");
  }
  if (grid.criterion == Criterion::kHoldoutNll && !data.sigma_val) {
    fail(ErrorKind::kInvalidInput, "hold-out criterion needs a validation covariance");
  }
  const std::size_t p = data.sigma_train.dim();
  const std::size_t nk = grid.k_values.size();
  std::vector<GridCell> cells(grid.multipliers.size() * nk);

  SolveOptions opts = options;
  std::mutex trace_mutex;
  if (options.trace) {
    opts.trace = [&](const TraceEvent& ev) {
      std::lock_guard<std::mutex> lock(trace_mutex);
      options.trace(ev);
    };
  }

  auto run_multiplier = [&](std::size_t m) {
    const double mult = grid.multipliers[m];
    for (std::size_t t = 0; t < nk; ++t) {
      cells[m * nk + t].k = grid.k_values[t];
      cells[m * nk + t].multiplier = mult;
    }
    std::optional<CuttingPlaneSolver> solver;
    try {
      solver.emplace(data.sigma_train, scaled_regularizer(kind, data.sigma_train, mult),
                     structural, opts);
    } catch (const Error& e) {
      for (std::size_t t = 0; t < nk; ++t) {
        cells[m * nk + t].error = e.what();
        cells[m * nk + t].error_kind = e.kind();
      }
      return;
    }
    for (std::size_t t = 0; t < nk; ++t) {
      GridCell& cell = cells[m * nk + t];
      try {
        cell.result = solver->solve(cell.k);
        cell.criterion = grid.criterion == Criterion::kEbic
                             ? ebic(cell.result.theta, data.sigma_train, data.n_train, p)
                             : holdout_nll(cell.result.theta, *data.sigma_val);
        cell.ok = true;
      } catch (const Error& e) {
        cell.error = e.what();
        cell.error_kind = e.kind();
      }
    }
  };

  const std::size_t n_workers = std::clamp<std::size_t>(threads, 1, grid.multipliers.size());
  if (n_workers == 1) {
    for (std::size_t m = 0; m < grid.multipliers.size(); ++m) run_multiplier(m);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t m = next++; m < grid.multipliers.size(); m = next++) run_multiplier(m);
      });
    }
    for (auto& th : pool) th.join();
  }

  const GridCell* best = nullptr;
  for (const GridCell& cell : cells) {
    if (!cell.ok) continue;
    if (best == nullptr || cell.criterion < best->criterion ||
        (cell.criterion == best->criterion &&
         (cell.k < best->k || (cell.k == best->k && cell.multiplier < best->multiplier)))) {
      best = &cell;
    }
  }
  if (best == nullptr) fail(cells.front().error_kind, "no grid cell could be solved: " + cells.front().error);

  TunedModel out;
  out.k = best->k;
  out.multiplier = best->multiplier;
  out.reg = scaled_regularizer(kind, data.sigma_train, best->multiplier);
  out.criterion = best->criterion;
  out.result = best->result;
  out.grid = std::move(cells);
  return out;
}

std::string grid_to_csv(std::span<const GridCell> cells) {
  std::ostringstream out;
  out << "k,reg_multiplier,objective,lower_bound,gap,criterion,time_s,cuts\n";
  for (const GridCell& c : cells) {
    out << c.k << ',' << format_double(c.multiplier) << ',';
    if (c.ok) {
      out << format_double(c.result.upper) << ',' << format_double(c.result.lower) << ','
          << format_double(c.result.relative_gap) << ',' << format_double(c.criterion) << ','
          << format_double(c.result.times.total_s) << ',' << c.result.cuts_generated;
    } else {
      out << ",,,,,";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace certprec
