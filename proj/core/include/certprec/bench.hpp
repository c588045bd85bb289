#pragma once

// Synthetic instances, recovery metrics and the experiment runner.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "certprec/cutplane.hpp"
#include "certprec/model.hpp"
#include "certprec/rng.hpp"

namespace certprec {

/// Stream ids for Rng(seed, stream).
enum RngStream : std::uint64_t {
  kStreamSupport = 1,
  kStreamTrain = 2,
  kStreamValidation = 3,
  kStreamTest = 4,
};

/// floor(t * p(p-1)/2).
std::size_t pairs_for_fraction(std::size_t p, double t);

/// k distinct pairs drawn uniformly.
Support random_support(std::size_t p, std::size_t k, Rng& rng);

/// n draws from N(0, cov), via the Cholesky factor of cov.
DataMatrix sample_gaussian(const SymmetricMatrix& cov, std::size_t n, Rng& rng);

struct CovselInstance {
  SymmetricMatrix sigma;
  Support z;
};

/// Theta0 = I + e e^T, n = p samples from N(0, Theta0^{-1}), support of
/// floor(t p(p-1)/2) uniform pairs.
CovselInstance gen_covsel_instance(std::size_t p, double t, std::uint64_t seed);

struct SyntheticInstance {
  SymmetricMatrix theta_true;
  Support support_true;
  SymmetricMatrix sigma_train;
  SymmetricMatrix sigma_val;
  SymmetricMatrix sigma_test;
  std::size_t n = 0;
  std::size_t p = 0;
  double t = 0.0;
  std::uint64_t seed = 0;
  double delta = 0.0;
};

/// Theta0 = delta I + 0.5 Z0 (Z0 with unit diagonal) with delta chosen so
/// that cond(Theta0) = p. Draws n train, n/2 validation and 5n test samples;
/// all three covariances are standardized with the train variances. Throws
/// kDegenerateInstance after 100 rejected supports.
SyntheticInstance gen_experiment_instance(std::size_t p, std::size_t n, double t,
                                          std::uint64_t seed);

struct Metrics {
  double accuracy = 0.0;
  double fdr = 0.0;
  double nll_test = 0.0;
  std::size_t k_selected = 0;
};

Metrics score(const SymmetricMatrix& theta, const Support& estimate,
              const SyntheticInstance& instance);
Metrics score(const SolveResult& result, const SyntheticInstance& instance);

enum class Method { kBigM, kRidge, kNeighborhood };
const char* to_string(Method m);

struct ExperimentConfig {
  std::size_t p = 20;
  std::size_t n = 20;  // 0 means n = p
  double t = 0.02;
  std::vector<std::uint64_t> seeds{1};
  std::vector<Method> methods{Method::kBigM, Method::kRidge, Method::kNeighborhood};
  std::vector<Criterion> criteria{Criterion::kHoldoutNll};
  /// Candidate budgets as multiples of k_true (rounded, de-duplicated and
  /// sorted decreasing); used unless `k_values` is given.
  std::vector<double> k_factors{2.0, 1.5, 1.25, 1.0, 0.8, 0.5};
  std::vector<std::size_t> k_values;
  std::vector<double> multipliers{1.0, 2.0, 4.0, 8.0, 16.0};
  SolveOptions solve;
  std::size_t threads = 1;
};

struct ResultRow {
  std::uint64_t seed = 0;
  Method method = Method::kBigM;
  Criterion criterion = Criterion::kHoldoutNll;
  bool ok = false;
  std::string error;
  Metrics metrics;
  double objective = 0.0;
  double lower_bound = 0.0;
  double gap = 0.0;
  double time_total_s = 0.0;
  double time_cuts_s = 0.0;
  std::size_t cuts = 0;
  std::size_t nodes = 0;
  Support support;
};

struct ExperimentReport {
  std::vector<ResultRow> rows;  // seed order, then method, then criterion

  /// Columns: seed, method, criterion, k_selected, A, FDR, nll_test, objective,
  /// lower_bound, gap, time_total_s, time_cuts_s, cuts, nodes; followed by
  /// mean and std rows per (method, criterion). With `timings` false the
  /// timing columns are written as 0 for byte-stable output.
  std::string csv(bool timings = true) const;
  std::string summary_json(bool timings = true) const;
};

/// Budgets used for an instance: explicit k_values or the k_true multiples.
std::vector<std::size_t> experiment_k_grid(const ExperimentConfig& cfg, std::size_t k_true);

ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace certprec
