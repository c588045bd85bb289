#include "certprec/cutplane.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>

#include <json.hpp>

#include "certprec/error.hpp"
#include "certprec/model.hpp"

namespace certprec {
namespace {

using Clock = std::chrono::steady_clock;
constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool tie_le(double a, double b) { return a <= b + 1e-12 * std::max(1.0, std::abs(b)); }

std::vector<std::uint32_t> weight_order(const std::vector<double>& w) {
  std::vector<std::uint32_t> order(w.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return w[a] > w[b]; });
  return order;
}

// Branching decisions are stored as +(idx + 1) for "pair in", -(idx + 1) for "pair out".
struct TreeNode {
  double bound = -kInf;
  std::uint64_t seq = 0;
  std::vector<std::int32_t> decisions;
};

struct WorseFirst {
  bool operator()(const TreeNode& a, const TreeNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.seq > b.seq;
  }
};

using NodeQueue = std::priority_queue<TreeNode, std::vector<TreeNode>, WorseFirst>;

// Relaxation of the master over a partial assignment, shared by the lazy tree
// and the standalone master search. Holds references to a cut pool that may
// grow between calls.
class Relaxation {
 public:
  struct Node {
    std::vector<signed char> state;  // +1 in, 0 out, -1 free
    std::vector<std::uint32_t> ones;
    std::size_t n_free = 0;
    std::size_t budget = 0;
    bool infeasible = false;
  };

  struct Bound {
    double value = -kInf;
    std::size_t binding = kNone;
  };

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  Relaxation(std::size_t p, std::size_t k, const Constraints& cs, const std::vector<Cut>& cuts,
             const std::vector<std::vector<std::uint32_t>>& orders)
      : p_(p),
        k_(k),
        cs_(cs),
        cuts_(cuts),
        orders_(orders),
        table_(p),
        guard_(p, cs),
        root_state_(pair_count(p), -1),
        counts_(pair_count(p), 0) {
    identity_.resize(pair_count(p));
    std::iota(identity_.begin(), identity_.end(), 0u);
    for (const auto& c : cs) {
      if (const auto* z = std::get_if<KnownZero>(&c)) {
        for (const Pair& e : z->pairs) root_state_[index_of(e)] = 0;
      }
    }
    for (const auto& c : cs) {
      if (const auto* o = std::get_if<KnownOne>(&c)) {
        for (const Pair& e : o->pairs) {
          const std::size_t idx = index_of(e);
          if (root_state_[idx] == 1) continue;
          if (root_state_[idx] == 0) root_conflict_ = true;
          root_state_[idx] = 1;
          root_ones_.push_back(static_cast<std::uint32_t>(idx));
        }
      }
    }
    root_free_ = static_cast<std::size_t>(
        std::count(root_state_.begin(), root_state_.end(), static_cast<signed char>(-1)));
  }

  std::size_t index_of(Pair e) const {
    if (e.i > e.j) std::swap(e.i, e.j);
    return pair_index(e.i, e.j, p_);
  }

  Node expand(const std::vector<std::int32_t>& decisions) const {
    Node nd;
    nd.state = root_state_;
    nd.ones = root_ones_;
    nd.infeasible = root_conflict_;
    nd.n_free = root_free_;
    for (const std::int32_t d : decisions) {
      const std::size_t idx = static_cast<std::size_t>(std::abs(d)) - 1;
      signed char& s = nd.state[idx];
      if (s != -1) {
        if ((d > 0) != (s == 1)) nd.infeasible = true;
        continue;
      }
      --nd.n_free;
      if (d > 0) {
        s = 1;
        nd.ones.push_back(static_cast<std::uint32_t>(idx));
      } else {
        s = 0;
      }
    }
    if (nd.ones.size() > k_) nd.infeasible = true;
    if (nd.infeasible) return nd;
    nd.budget = k_ - nd.ones.size();
    if (!cs_.empty() &&
        prune_partial(PartialAssignment{p_, nd.state, nd.budget}, cs_) == Feasibility::kInfeasible) {
      nd.infeasible = true;
    }
    return nd;
  }

  // c0 - sum over fixed ones - the largest free weights the budget allows.
  double cut_at_node(std::size_t c, const Node& nd, std::vector<std::uint32_t>* sel) const {
    const std::vector<double>& w = cuts_[c].weights;
    double v = cuts_[c].c0;
    for (const std::uint32_t e : nd.ones) v -= w[e];
    const std::size_t r = std::min(nd.budget, nd.n_free);
    std::size_t taken = 0;
    for (const std::uint32_t e : orders_[c]) {
      if (taken == r) break;
      if (nd.state[e] != -1) continue;
      if (sel == nullptr && !(w[e] > 0.0)) break;
      v -= w[e];
      if (sel != nullptr) sel->push_back(e);
      ++taken;
    }
    return v;
  }

  Bound bound(const Node& nd) const {
    Bound b;
    for (std::size_t c = 0; c < cuts_.size(); ++c) {
      const double v = cut_at_node(c, nd, nullptr);
      if (b.binding == kNone || v > b.value) {
        b.value = v;
        b.binding = c;
      }
    }
    return b;
  }

  const std::vector<std::uint32_t>& order_of(std::size_t binding) const {
    return binding == kNone ? identity_ : orders_[binding];
  }

  // Completion of the node that is optimal for the binding cut, steered by the
  // structural guard when constraints are present. Returned sorted.
  std::vector<std::uint32_t> candidate(const Node& nd, std::size_t binding) {
    std::vector<std::uint32_t> z = nd.ones;
    const std::size_t r = std::min(nd.budget, nd.n_free);
    std::size_t taken = 0;
    const bool guarded = !cs_.empty();
    if (guarded) {
      guard_.reset();
      for (const std::uint32_t e : nd.ones) guard_.add(table_[e]);
    }
    for (const std::uint32_t e : order_of(binding)) {
      if (taken == r) break;
      if (nd.state[e] != -1) continue;
      if (guarded) {
        if (!guard_.can_add(table_[e])) continue;
        guard_.add(table_[e]);
      }
      z.push_back(e);
      ++taken;
    }
    std::sort(z.begin(), z.end());
    return z;
  }

  Support to_support(const std::vector<std::uint32_t>& z) const {
    std::vector<Pair> pairs;
    pairs.reserve(z.size());
    for (const std::uint32_t e : z) pairs.push_back(table_[e]);
    return Support(p_, std::move(pairs));
  }

  double cut_value(std::size_t c, const std::vector<std::uint32_t>& z) const {
    double v = cuts_[c].c0;
    for (const std::uint32_t e : z) v -= cuts_[c].weights[e];
    return v;
  }

  double value(const std::vector<std::uint32_t>& z) const {
    double v = -kInf;
    for (std::size_t c = 0; c < cuts_.size(); ++c) v = std::max(v, cut_value(c, z));
    return v;
  }

  // Free pair on which the active cuts' greedy selections disagree most.
  // Active cuts: the binding one plus every cut violated at the candidate.
  std::uint32_t branch_pair(const Node& nd, std::size_t binding,
                            const std::vector<std::uint32_t>& cand, double bound_value) {
    std::vector<std::size_t> active;
    if (binding != kNone) active.push_back(binding);
    for (std::size_t c = 0; c < cuts_.size(); ++c) {
      if (c != binding && !tie_le(cut_value(c, cand), bound_value)) active.push_back(c);
    }
    if (active.size() >= 2) {
      std::vector<std::uint32_t> touched, sel;
      for (const std::size_t c : active) {
        sel.clear();
        cut_at_node(c, nd, &sel);
        for (const std::uint32_t e : sel) {
          if (counts_[e]++ == 0) touched.push_back(e);
        }
      }
      const std::size_t n_active = active.size();
      std::uint32_t best = 0;
      std::size_t best_score = 0, best_count = 0;
      for (const std::uint32_t e : touched) {
        const std::size_t cnt = counts_[e];
        const std::size_t score = std::min(cnt, n_active - cnt);
        if (score > best_score || (score == best_score && score > 0 &&
                                   (cnt > best_count || (cnt == best_count && e < best)))) {
          best = e;
          best_score = score;
          best_count = cnt;
        }
      }
      for (const std::uint32_t e : touched) counts_[e] = 0;
      if (best_score > 0) return best;
    }
    const auto& order = order_of(binding);
    for (const std::uint32_t e : order) {
      if (nd.state[e] == -1 && std::binary_search(cand.begin(), cand.end(), e)) return e;
    }
    for (const std::uint32_t e : order) {
      if (nd.state[e] == -1) return e;
    }
    fail(ErrorKind::kInvalidInput, "branch requested at a node without free pairs");
  }

  bool feasible(const std::vector<std::uint32_t>& z) const {
    return cs_.empty() || check_complete(to_support(z), cs_);
  }

  std::size_t dim() const noexcept { return p_; }

 private:
  std::size_t p_;
  std::size_t k_;
  const Constraints& cs_;
  const std::vector<Cut>& cuts_;
  const std::vector<std::vector<std::uint32_t>>& orders_;
  PairTable table_;
  AdditionGuard guard_;
  std::vector<signed char> root_state_;
  std::vector<std::uint32_t> root_ones_;
  std::size_t root_free_ = 0;
  bool root_conflict_ = false;
  std::vector<std::uint32_t> identity_;
  std::vector<std::uint32_t> counts_;
};

void push_children(NodeQueue& queue, const TreeNode& node, std::uint32_t e, std::uint64_t& seq) {
  TreeNode in{node.bound, seq++, node.decisions};
  in.decisions.push_back(static_cast<std::int32_t>(e) + 1);
  TreeNode out{node.bound, seq++, node.decisions};
  out.decisions.push_back(-(static_cast<std::int32_t>(e) + 1));
  queue.push(std::move(in));
  queue.push(std::move(out));
}

struct MasterOutcome {
  bool found = false;
  std::vector<std::uint32_t> support;
  double eta = kInf;
  std::size_t nodes = 0;
};

// Exact best-first search over the current cut collection, no new cuts.
MasterOutcome master_search(Relaxation& rx, double gap_tol) {
  MasterOutcome out;
  NodeQueue queue;
  std::uint64_t seq = 0;
  queue.push(TreeNode{-kInf, seq++, {}});
  while (!queue.empty()) {
    TreeNode node = queue.top();
    queue.pop();
    if (out.found && node.bound >= out.eta - gap_tol) break;
    ++out.nodes;
    const Relaxation::Node nd = rx.expand(node.decisions);
    if (nd.infeasible) continue;
    const Relaxation::Bound b = rx.bound(nd);
    node.bound = std::max(node.bound, b.value);
    if (out.found && node.bound >= out.eta - gap_tol) continue;
    const bool leaf = nd.budget == 0 || nd.n_free == 0;
    std::vector<std::uint32_t> cand = nd.ones;
    if (leaf) {
      std::sort(cand.begin(), cand.end());
    } else {
      cand = rx.candidate(nd, b.binding);
    }
    const bool feasible = rx.feasible(cand);
    const double value = rx.value(cand);
    if (feasible && (!out.found || value < out.eta)) {
      out.found = true;
      out.eta = value;
      out.support = cand;
    }
    if (leaf) continue;
    if (feasible && tie_le(value, node.bound)) continue;
    push_children(queue, node, rx.branch_pair(nd, b.binding, cand, node.bound), seq);
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> orders_of(const std::vector<Cut>& cuts) {
  std::vector<std::vector<std::uint32_t>> orders;
  orders.reserve(cuts.size());
  for (const Cut& c : cuts) orders.push_back(weight_order(c.weights));
  return orders;
}

void check_cut_dims(const MasterState& state) {
  for (const Cut& c : state.cuts) {
    if (c.weights.size() != pair_count(state.p)) {
      fail(ErrorKind::kInvalidInput, "cut weight vector does not match dimension");
    }
  }
}

}  // namespace

double Cut::evaluate(const Support& z) const {
  double v = c0;
  for (const Pair& e : z.pairs()) v -= weights[pair_index(e.i, e.j, z.dim())];
  return v;
}

double Cut::evaluate_indices(std::span<const std::size_t> pair_indices) const {
  double v = c0;
  for (const std::size_t idx : pair_indices) v -= weights[idx];
  return v;
}

Cut make_cut(const SymmetricMatrix& sigma, const CovSelSolution& sol, const Support& z,
             const Regularizer& reg) {
  const std::size_t p = sigma.dim();
  const SymmetricMatrix& r = sol.dual_point;
  if (r.dim() != p || z.dim() != p) fail(ErrorKind::kInvalidInput, "make_cut: dimension mismatch");
  Cut cut;
  cut.source_support = z;
  cut.weights.resize(pair_count(p));
  std::size_t idx = 0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j, ++idx) {
      cut.weights[idx] = 2.0 * conjugate(reg, i, j, r(i, j));
    }
  }
  if (std::isfinite(sol.dual_value)) {
    // dual_value = c0 - sum_{z} w, so this reproduces it exactly at z.
    double on_support = 0.0;
    for (const Pair& e : z.pairs()) on_support += cut.weights[pair_index(e.i, e.j, p)];
    cut.c0 = sol.dual_value + on_support;
    if (std::isfinite(cut.c0)) return cut;
  }
  try {
    double c0 = static_cast<double>(p) + log_det(cholesky(sigma + r));
    for (std::size_t i = 0; i < p; ++i) c0 -= conjugate(reg, i, i, r(i, i));
    cut.c0 = c0;
  } catch (const Error&) {
    cut.c0 = -kInf;
  }
  return cut;
}

double node_bound(const MasterState& state, std::span<const Pair> fixed_one,
                  std::span<const Pair> fixed_zero) {
  check_cut_dims(state);
  const auto orders = orders_of(state.cuts);
  Relaxation rx(state.p, state.k, state.structural, state.cuts, orders);
  std::vector<std::int32_t> decisions;
  for (const Pair& e : fixed_one) decisions.push_back(static_cast<std::int32_t>(rx.index_of(e)) + 1);
  for (const Pair& e : fixed_zero) {
    decisions.push_back(-(static_cast<std::int32_t>(rx.index_of(e)) + 1));
  }
  const Relaxation::Node nd = rx.expand(decisions);
  if (nd.infeasible) fail(ErrorKind::kInfeasible, "node admits no feasible completion");
  return rx.bound(nd).value;
}

MasterSolution solve_master(const MasterState& state, double gap_tol) {
  if (state.cuts.empty()) fail(ErrorKind::kInvalidInput, "solve_master needs at least one cut");
  check_cut_dims(state);
  validate(state.structural, state.p);
  const auto orders = orders_of(state.cuts);
  Relaxation rx(state.p, state.k, state.structural, state.cuts, orders);
  const MasterOutcome out = master_search(rx, gap_tol);
  if (!out.found) fail(ErrorKind::kInfeasible, "structural constraints exclude every support");
  return MasterSolution{rx.to_support(out.support), out.eta, out.nodes};
}

std::string to_json_line(const TraceEvent& ev) {
  const char* kind = "node";
  switch (ev.kind) {
    case TraceEvent::Kind::kNodeOpened: kind = "node"; break;
    case TraceEvent::Kind::kCutAdded: kind = "cut"; break;
    case TraceEvent::Kind::kIncumbentUpdated: kind = "incumbent"; break;
  }
  auto finite_or_null = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json j = {
      {"event", kind},
      {"elapsed_s", ev.elapsed_s},
      {"nodes", ev.nodes},
      {"cuts", ev.cuts},
      {"lower", finite_or_null(ev.lower)},
      {"upper", finite_or_null(ev.upper)},
      {"value", finite_or_null(ev.value)},
      {"support_size", ev.support_size},
  };
  return j.dump();
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kTimeLimit: return "time_limit";
    case SolveStatus::kNodeLimit: return "node_limit";
    case SolveStatus::kCutLimit: return "cut_limit";
    case SolveStatus::kStalled: return "stalled";
  }
  return "unknown";
}

CuttingPlaneSolver::CuttingPlaneSolver(SymmetricMatrix sigma, Regularizer reg,
                                       Constraints structural, SolveOptions options)
    : sigma_(std::move(sigma)),
      reg_(std::move(reg)),
      structural_(std::move(structural)),
      options_(std::move(options)),
      p_(sigma_.dim()) {
  if (p_ == 0) fail(ErrorKind::kInvalidInput, "empty covariance");
  if (!sigma_.is_finite()) fail(ErrorKind::kInvalidInput, "covariance has non-finite entries");
  for (std::size_t i = 0; i < p_; ++i) {
    if (!(sigma_(i, i) > 0.0)) fail(ErrorKind::kInvalidInput, "covariance diagonal must be > 0");
  }
  if (!(options_.eps > 0.0)) fail(ErrorKind::kInvalidInput, "eps must be > 0");
  if (!(options_.subproblem_gap_fraction > 0.0)) {
    fail(ErrorKind::kInvalidInput, "subproblem_gap_fraction must be > 0");
  }
  validate(reg_, p_);
  validate(structural_, p_);
  // Scale of the objective: its value at the unregularized diagonal solution.
  double scale = static_cast<double>(p_);
  for (std::size_t i = 0; i < p_; ++i) scale += std::log(sigma_(i, i));
  sub_gap_tol_ = std::min(options_.covsel.gap_tol, options_.subproblem_gap_fraction *
                                                       options_.eps *
                                                       std::max(1.0, std::abs(scale)));
}

double CuttingPlaneSolver::elapsed() const { return seconds_since(start_); }

double CuttingPlaneSolver::eps_abs(double upper) const {
  return options_.eps * std::max(1.0, std::abs(upper));
}

void CuttingPlaneSolver::emit(TraceEvent ev) const {
  if (!options_.trace) return;
  ev.elapsed_s = elapsed();
  ev.nodes = nodes_;
  ev.cuts = cuts_.size();
  ev.lower = lower_;
  ev.upper = incumbent_ ? incumbent_->value : kInf;
  options_.trace(ev);
}

void CuttingPlaneSolver::add_cut(Cut cut) {
  orders_.push_back(weight_order(cut.weights));
  cuts_.push_back(std::move(cut));
}

void CuttingPlaneSolver::consider_incumbent(const Support& z, double value,
                                            const SymmetricMatrix* theta) {
  if (incumbent_ && !(value < incumbent_->value)) return;
  Incumbent inc{z, value, std::nullopt};
  if (theta != nullptr) inc.theta = *theta;
  incumbent_ = std::move(inc);
  TraceEvent ev;
  ev.kind = TraceEvent::Kind::kIncumbentUpdated;
  ev.value = value;
  ev.support_size = z.size();
  emit(ev);
}

double CuttingPlaneSolver::evaluate(const Support& z) {
  if (z.dim() != p_) fail(ErrorKind::kInvalidInput, "support dimension mismatch");
  if (auto it = evaluated_.find(z); it != evaluated_.end()) return it->second.primal;
  const auto t0 = Clock::now();
  CovSelOptions opts = options_.covsel;
  opts.gap_tol = sub_gap_tol_;
  const CovSelSolution sol = solve_covsel(sigma_, z, reg_, opts);
  times_.subproblem_s += seconds_since(t0);
  evaluated_.emplace(z, Evaluation{sol.primal_value, sol.dual_value});
  Cut cut = make_cut(sigma_, sol, z, reg_);
  if (std::isfinite(cut.c0)) {
    const double at_z = cut.evaluate(z);
    add_cut(std::move(cut));
    TraceEvent ev;
    ev.kind = TraceEvent::Kind::kCutAdded;
    ev.value = at_z;
    ev.support_size = z.size();
    emit(ev);
  }
  if (z.size() <= k_ && check_complete(z, structural_)) {
    consider_incumbent(z, sol.primal_value, &sol.theta);
  }
  return sol.primal_value;
}

SolveResult CuttingPlaneSolver::solve(std::size_t k) {
  start_ = Clock::now();
  times_ = {};
  k_ = k;
  nodes_ = 0;
  lower_ = -kInf;
  cuts_at_start_ = cuts_.size();
  incumbent_.reset();

  for (const auto& [z, ev] : evaluated_) {
    if (z.size() <= k && check_complete(z, structural_)) consider_incumbent(z, ev.primal, nullptr);
  }
  std::optional<Support> warm = options_.warm;
  if (!warm && options_.warm_mode == WarmStartMode::kNeighborhood) warm = warm_start(sigma_, k);
  if (!warm) warm = Support(p_);
  evaluate(*warm);
  if (options_.local_search_evals > 0 && incumbent_) local_search(incumbent_->support);
  return options_.multi_tree ? solve_multi_tree() : solve_single_tree();
}

// First-improvement 1-swap search. Additions are ranked by the weights of the
// current support's cut (largest first-order decrease), removals by |Theta_ij|
// (weakest entries first). Below the budget, the best addition is tried alone.
void CuttingPlaneSolver::local_search(Support start) {
  constexpr std::size_t kAdds = 10;
  std::size_t evals = 0;
  auto out_of_budget = [&] {
    return evals >= options_.local_search_evals || elapsed() >= options_.time_limit_s;
  };
  Support cur = std::move(start);
  bool improved = true;
  while (improved && !out_of_budget()) {
    improved = false;
    const double cur_value = evaluate(cur);
    const Cut* cut = nullptr;
    for (auto it = cuts_.rbegin(); it != cuts_.rend(); ++it) {
      if (it->source_support == cur) {
        cut = &*it;
        break;
      }
    }
    if (cut == nullptr) return;
    std::vector<std::size_t> in = cur.indices();
    std::vector<std::uint32_t> adds;
    for (const std::uint32_t e : weight_order(cut->weights)) {
      if (adds.size() == kAdds) break;
      if (!std::binary_search(in.begin(), in.end(), e)) adds.push_back(e);
    }
    std::vector<std::size_t> removals = in;
    if (incumbent_ && incumbent_->support == cur && incumbent_->theta) {
      // pairs() and indices() list the same pairs in the same order.
      const SymmetricMatrix& th = *incumbent_->theta;
      const std::vector<Pair>& pairs = cur.pairs();
      std::vector<std::size_t> pos(in.size());
      for (std::size_t t = 0; t < pos.size(); ++t) pos[t] = t;
      std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(th(pairs[a].i, pairs[a].j)) < std::abs(th(pairs[b].i, pairs[b].j));
      });
      for (std::size_t t = 0; t < pos.size(); ++t) removals[t] = in[pos[t]];
    }
    auto try_support = [&](std::vector<std::size_t> idx) {
      std::sort(idx.begin(), idx.end());
      const Support z = Support::from_indices(p_, idx);
      if (evaluated_.count(z) != 0 || !check_complete(z, structural_)) return false;
      ++evals;
      if (evaluate(z) < cur_value - eps_abs(cur_value)) {
        cur = z;
        return true;
      }
      return false;
    };
    for (const std::uint32_t a : adds) {
      if (out_of_budget() || improved) break;
      if (in.size() < k_) {
        std::vector<std::size_t> idx = in;
        idx.push_back(a);
        improved = try_support(std::move(idx));
        continue;
      }
      for (const std::size_t r : removals) {
        if (out_of_budget()) break;
        std::vector<std::size_t> idx = in;
        *std::find(idx.begin(), idx.end(), r) = a;
        if ((improved = try_support(std::move(idx)))) break;
      }
    }
  }
}

SolveResult CuttingPlaneSolver::finish(SolveStatus status, double lower) {
  if (!incumbent_) fail(ErrorKind::kInfeasible, "structural constraints exclude every support");
  if (!incumbent_->theta) {
    const auto t0 = Clock::now();
    CovSelOptions opts = options_.covsel;
    opts.gap_tol = sub_gap_tol_;
    const CovSelSolution sol = solve_covsel(sigma_, incumbent_->support, reg_, opts);
    times_.subproblem_s += seconds_since(t0);
    incumbent_->theta = sol.theta;
  }
  SolveResult res;
  res.k = k_;
  res.support = incumbent_->support;
  res.theta = *incumbent_->theta;
  res.upper = incumbent_->value;
  res.lower = std::min(lower, res.upper);
  res.relative_gap = (res.upper - res.lower) / std::max(1.0, std::abs(res.upper));
  res.cuts_generated = cuts_.size() - cuts_at_start_;
  res.cut_pool_size = cuts_.size();
  res.nodes_explored = nodes_;
  res.times.total_s = elapsed();
  res.times.subproblem_s = times_.subproblem_s;
  res.times.master_s = std::max(0.0, res.times.total_s - res.times.subproblem_s);
  res.status = status;
  return res;
}

SolveResult CuttingPlaneSolver::solve_single_tree() {
  Relaxation rx(p_, k_, structural_, cuts_, orders_);
  NodeQueue queue;
  std::uint64_t seq = 0;
  queue.push(TreeNode{-kInf, seq++, {}});
  double fathomed = kInf;  // min bound over nodes closed by bound
  SolveStatus status = SolveStatus::kOptimal;
  bool exhausted = true;
  auto upper = [&] { return incumbent_ ? incumbent_->value : kInf; };

  while (!queue.empty()) {
    TreeNode node = queue.top();
    queue.pop();
    lower_ = std::max(lower_, std::min({fathomed, node.bound, upper()}));
    if (incumbent_ && lower_ >= upper() - eps_abs(upper())) {
      exhausted = false;
      break;
    }
    const bool time_out = elapsed() >= options_.time_limit_s;
    const bool node_out = options_.max_nodes > 0 && nodes_ >= options_.max_nodes;
    const bool cut_out =
        options_.max_cuts > 0 && cuts_.size() - cuts_at_start_ >= options_.max_cuts;
    if (time_out || node_out || cut_out) {
      status = time_out   ? SolveStatus::kTimeLimit
               : node_out ? SolveStatus::kNodeLimit
                          : SolveStatus::kCutLimit;
      exhausted = false;
      break;
    }
    ++nodes_;

    const Relaxation::Node nd = rx.expand(node.decisions);
    if (nd.infeasible) continue;
    bool announced = false;
    while (true) {
      const Relaxation::Bound b = rx.bound(nd);
      node.bound = std::max(node.bound, b.value);
      const double ub = upper();
      const double ea = eps_abs(ub);
      if (incumbent_ && node.bound >= ub - ea) {
        fathomed = std::min(fathomed, node.bound);
        break;
      }
      // A stale priority: let a node with a smaller bound go first.
      if (!queue.empty() && !tie_le(node.bound, queue.top().bound)) {
        queue.push(node);
        break;
      }
      if (!announced) {
        announced = true;
        TraceEvent ev;
        ev.kind = TraceEvent::Kind::kNodeOpened;
        ev.value = node.bound;
        emit(ev);
      }
      const bool leaf = nd.budget == 0 || nd.n_free == 0;
      std::vector<std::uint32_t> cand = nd.ones;
      if (leaf) {
        std::sort(cand.begin(), cand.end());
      } else {
        cand = rx.candidate(nd, b.binding);
      }
      const Support z = rx.to_support(cand);
      const bool feasible = rx.feasible(cand);
      const double value = rx.value(cand);
      if (feasible && evaluated_.count(z) == 0 && (!incumbent_ || value < ub - ea)) {
        evaluate(z);
        continue;
      }
      if (leaf) {
        if (feasible) fathomed = std::min(fathomed, node.bound);
        break;
      }
      if (feasible && tie_le(value, node.bound)) {
        // The master optimum of this node is already evaluated (or cannot
        // improve the incumbent): its bound is final.
        fathomed = std::min(fathomed, node.bound);
        break;
      }
      push_children(queue, node, rx.branch_pair(nd, b.binding, cand, node.bound), seq);
      break;
    }
  }
  if (exhausted) lower_ = std::max(lower_, std::min(fathomed, upper()));
  return finish(status, lower_);
}

SolveResult CuttingPlaneSolver::solve_multi_tree() {
  SolveStatus status = SolveStatus::kOptimal;
  while (true) {
    if (elapsed() >= options_.time_limit_s) {
      status = SolveStatus::kTimeLimit;
      break;
    }
    if (options_.max_nodes > 0 && nodes_ >= options_.max_nodes) {
      status = SolveStatus::kNodeLimit;
      break;
    }
    if (options_.max_cuts > 0 && cuts_.size() - cuts_at_start_ >= options_.max_cuts) {
      status = SolveStatus::kCutLimit;
      break;
    }
    Relaxation rx(p_, k_, structural_, cuts_, orders_);
    const MasterOutcome out = master_search(rx, 1e-12);
    nodes_ += out.nodes;
    if (!out.found) fail(ErrorKind::kInfeasible, "structural constraints exclude every support");
    const double ub = incumbent_ ? incumbent_->value : kInf;
    lower_ = std::max(lower_, std::min(out.eta, ub));
    if (incumbent_ && lower_ >= ub - eps_abs(ub)) break;
    const Support z = rx.to_support(out.support);
    if (evaluated_.count(z) != 0) {
      // The cut at z is not tight enough to separate; no further progress.
      status = SolveStatus::kStalled;
      break;
    }
    evaluate(z);
  }
  return finish(status, lower_);
}

SolveResult solve(const SymmetricMatrix& sigma, std::size_t k, const Regularizer& reg,
                  const Constraints& structural, const SolveOptions& options) {
  CuttingPlaneSolver solver(sigma, reg, structural, options);
  return solver.solve(k);
}

std::vector<SolveResult> solve_path(const SymmetricMatrix& sigma,
                                    std::span<const std::size_t> k_list, const Regularizer& reg,
                                    const Constraints& structural, const SolveOptions& options) {
  for (std::size_t t = 1; t < k_list.size(); ++t) {
    if (!(k_list[t] < k_list[t - 1])) {
      fail(ErrorKind::kInvalidInput, "k_list must be strictly decreasing");
    }
  }
  CuttingPlaneSolver solver(sigma, reg, structural, options);
  std::vector<SolveResult> out;
  out.reserve(k_list.size());
  for (const std::size_t k : k_list) out.push_back(solver.solve(k));
  return out;
}

}  // namespace certprec
