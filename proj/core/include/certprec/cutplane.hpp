#pragma once

// Outer approximation over binary supports. The support-value function
// h(Z) (regularized covariance selection) is convex in Z and every dual-feasible
// R yields the global affine lower bound
//   h(Z') >= p + log det(Sigma + R) - <Z', Omega^*(R)>.
// The master problem minimizes the max of these cuts over supports with at
// most k pairs by a bespoke best-first branch-and-bound; new cuts are added
// lazily whenever the tree reaches an unevaluated integer support.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "certprec/covsel.hpp"
#include "certprec/linalg.hpp"
#include "certprec/regularizer.hpp"
#include "certprec/structure.hpp"
#include "certprec/support.hpp"

namespace certprec {

/// Affine lower bound c0 - sum_{(i,j) in Z} w_ij on h over supports, with
/// weights indexed by pair_index.
struct Cut {
  double c0 = 0.0;
  std::vector<double> weights;
  Support source_support;

  double evaluate(const Support& z) const;
  double evaluate_indices(std::span<const std::size_t> pair_indices) const;
};

/// c0 = p + log det(Sigma + R) - sum_i Omega_ii^*(R_ii), w_ij = 2 Omega_ij^*(R_ij),
/// with R = sol.dual_point. Evaluating at z reproduces sol.dual_value.
Cut make_cut(const SymmetricMatrix& sigma, const CovSelSolution& sol, const Support& z,
             const Regularizer& reg);

struct MasterState {
  std::size_t p = 0;
  std::size_t k = 0;
  std::vector<Cut> cuts;
  Constraints structural;
};

/// max over cuts of [c0 - sum_{fixed_one} w - (sum of the k - |fixed_one|
/// largest free weights)]. Throws Error(kInfeasible) when the structural
/// constraints rule out every completion.
double node_bound(const MasterState& state, std::span<const Pair> fixed_one,
                  std::span<const Pair> fixed_zero);

struct MasterSolution {
  Support support;
  double eta = 0.0;
  std::size_t nodes = 0;
};

/// Exact minimizer of max-of-cuts over feasible supports. Ties resolve to the
/// first optimum found; with a constant cut that is the lexicographically
/// smallest k pairs consistent with the structure.
MasterSolution solve_master(const MasterState& state, double gap_tol = 1e-12);

enum class WarmStartMode { kNeighborhood, kNone };

struct TraceEvent {
  enum class Kind { kNodeOpened, kCutAdded, kIncumbentUpdated };
  Kind kind = Kind::kNodeOpened;
  double elapsed_s = 0.0;
  std::size_t nodes = 0;
  std::size_t cuts = 0;
  double lower = 0.0;
  double upper = 0.0;
  double value = 0.0;  // node bound, cut value at its support, or new incumbent
  std::size_t support_size = 0;
};

std::string to_json_line(const TraceEvent& ev);

struct SolveOptions {
  /// Stop once (upper - lower) <= eps * max(1, |upper|).
  double eps = 1e-4;
  double time_limit_s = 300.0;
  /// Deterministic work budgets; 0 means unlimited.
  std::size_t max_nodes = 0;
  std::size_t max_cuts = 0;
  /// Subproblems are solved to gap_fraction * eps * max(1, |scale|), capped by
  /// covsel.gap_tol.
  double subproblem_gap_fraction = 0.1;
  CovSelOptions covsel{.gap_tol = 1e-4};
  /// Re-solve the full master after each cut instead of one lazy tree.
  bool multi_tree = false;
  WarmStartMode warm_mode = WarmStartMode::kNeighborhood;
  std::optional<Support> warm;
  /// Support evaluations spent on a 1-swap local search around the warm
  /// start before branching; 0 disables it.
  std::size_t local_search_evals = 200;
  std::function<void(const TraceEvent&)> trace;
};

enum class SolveStatus { kOptimal, kTimeLimit, kNodeLimit, kCutLimit, kStalled };
const char* to_string(SolveStatus status);

struct PhaseTimes {
  double total_s = 0.0;
  double master_s = 0.0;
  double subproblem_s = 0.0;
};

struct SolveResult {
  std::size_t k = 0;
  Support support;
  SymmetricMatrix theta;
  double upper = 0.0;
  double lower = 0.0;
  double relative_gap = 0.0;
  std::size_t cuts_generated = 0;
  std::size_t cut_pool_size = 0;
  std::size_t nodes_explored = 0;
  PhaseTimes times;
  SolveStatus status = SolveStatus::kOptimal;
};

/// Holds the cut pool and the evaluated-support cache across solves, so that a
/// sequence of budgets reuses every cut (cuts do not depend on k).
class CuttingPlaneSolver {
 public:
  CuttingPlaneSolver(SymmetricMatrix sigma, Regularizer reg, Constraints structural,
                     SolveOptions options);

  SolveResult solve(std::size_t k);

  const std::vector<Cut>& cuts() const noexcept { return cuts_; }
  const SymmetricMatrix& sigma() const noexcept { return sigma_; }
  const Regularizer& regularizer() const noexcept { return reg_; }
  /// Evaluates h at z (cached) and appends its cut.
  double evaluate(const Support& z);

 private:
  struct Evaluation {
    double primal = 0.0;
    double dual = 0.0;
  };
  struct Incumbent {
    Support support;
    double value = 0.0;
    std::optional<SymmetricMatrix> theta;
  };

  void add_cut(Cut cut);
  void local_search(Support start);
  double elapsed() const;
  double eps_abs(double upper) const;
  void consider_incumbent(const Support& z, double value, const SymmetricMatrix* theta);
  void emit(TraceEvent ev) const;
  SolveResult finish(SolveStatus status, double lower);
  SolveResult solve_single_tree();
  SolveResult solve_multi_tree();

  SymmetricMatrix sigma_;
  Regularizer reg_;
  Constraints structural_;
  SolveOptions options_;
  std::size_t p_;
  double sub_gap_tol_;

  std::vector<Cut> cuts_;
  std::vector<std::vector<std::uint32_t>> orders_;  // pair indices by weight desc
  std::map<Support, Evaluation> evaluated_;

  // Per-solve state.
  std::size_t k_ = 0;
  std::optional<Incumbent> incumbent_;
  std::size_t cuts_at_start_ = 0;
  std::size_t nodes_ = 0;
  double lower_ = 0.0;
  std::chrono::steady_clock::time_point start_;
  PhaseTimes times_;
};

SolveResult solve(const SymmetricMatrix& sigma, std::size_t k, const Regularizer& reg,
                  const Constraints& structural, const SolveOptions& options);

/// Solves strictly decreasing budgets in order, carrying the cut pool forward.
std::vector<SolveResult> solve_path(const SymmetricMatrix& sigma,
                                    std::span<const std::size_t> k_list, const Regularizer& reg,
                                    const Constraints& structural, const SolveOptions& options);

}  // namespace certprec
