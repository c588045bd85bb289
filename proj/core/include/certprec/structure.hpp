#pragma once

// Structural side constraints on supports. Degrees are graph degrees,
// d_i = sum_{j != i} Z_ij.

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "certprec/support.hpp"

namespace certprec {

struct KnownZero {
  std::vector<Pair> pairs;
};

struct KnownOne {
  std::vector<Pair> pairs;
};

struct DegreeBounds {
  std::vector<std::size_t> lower;  // one entry per node
  std::vector<std::size_t> upper;
};

/// |(1/p) sum_i d_i - target| <= slack, i.e. a window on the pair count.
struct AverageDegree {
  double target = 0.0;
  double slack = 0.0;
};

/// At most `max_hubs` nodes with degree above d_low; no node above d_high.
struct Hubs {
  std::size_t d_low = 0;
  std::size_t d_high = 0;
  std::size_t max_hubs = 0;
};

using StructuralConstraint = std::variant<KnownZero, KnownOne, DegreeBounds, AverageDegree, Hubs>;
using Constraints = std::vector<StructuralConstraint>;

/// Throws Error(kInvalidInput) on out-of-range indices, S0/S1 overlap, or
/// inconsistent bounds.
void validate(const Constraints& cs, std::size_t p);

/// Inclusive pair-count window [lo, hi] implied by an AverageDegree constraint.
struct CountWindow {
  std::size_t lo = 0;
  std::size_t hi = 0;
};
CountWindow pair_count_window(const AverageDegree& c, std::size_t p);

bool check_complete(const Support& z, const Constraints& cs);

enum class Feasibility { kFeasible, kInfeasible };

/// Partial assignment over pair indices (lexicographic pair order). State per
/// pair: +1 fixed one, 0 fixed zero, -1 free.
struct PartialAssignment {
  std::size_t dim = 0;
  std::span<const signed char> state;
  std::size_t budget_left = 0;
};

/// Sound but incomplete: kInfeasible only when no completion using at most
/// budget_left further pairs satisfies every constraint.
Feasibility prune_partial(const PartialAssignment& node, const Constraints& cs);

/// Convenience overload over explicit pair sets.
Feasibility prune_partial(std::size_t p, std::span<const Pair> fixed_one,
                          std::span<const Pair> fixed_zero, std::size_t budget_left,
                          const Constraints& cs);

/// True when adding the pair keeps every upper-type requirement (degree upper
/// bounds, hub limits, known zeros, pair-count ceiling) satisfiable; used to
/// steer greedy completions toward feasible supports.
class AdditionGuard {
 public:
  AdditionGuard(std::size_t p, const Constraints& cs);
  void reset();
  bool can_add(const Pair& e) const;
  void add(const Pair& e);
  std::size_t count() const noexcept { return count_; }

 private:
  bool allowed_degree(std::size_t node, std::size_t new_degree, std::size_t extra_hubs) const;

  std::size_t p_;
  std::vector<std::size_t> degree_cap_;
  std::vector<signed char> forbidden_;  // by pair index
  bool has_hubs_ = false;
  Hubs hubs_;
  std::size_t count_cap_;
  std::vector<std::size_t> degree_;
  std::size_t hubs_used_ = 0;
  std::size_t count_ = 0;
};

}  // namespace certprec
