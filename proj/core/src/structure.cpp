#include "certprec/structure.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "certprec/error.hpp"

namespace certprec {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_pairs(const std::vector<Pair>& pairs, std::size_t p, const char* what) {
  for (const Pair& e : pairs) {
    if (e.i == e.j || e.i >= p || e.j >= p) {
      fail(ErrorKind::kInvalidInput, std::string(what) + ": pair (" + std::to_string(e.i) + "," +
                                         std::to_string(e.j) + ") invalid for p=" +
                                         std::to_string(p));
    }
  }
}

Pair normalized(Pair e) {
  if (e.i > e.j) std::swap(e.i, e.j);
  return e;
}

}  // namespace

void validate(const Constraints& cs, std::size_t p) {
  std::set<Pair> zeros, ones;
  for (const auto& c : cs) {
    std::visit(Overloaded{
                   [&](const KnownZero& k) {
                     check_pairs(k.pairs, p, "known_zero");
                     for (const Pair& e : k.pairs) zeros.insert(normalized(e));
                   },
                   [&](const KnownOne& k) {
                     check_pairs(k.pairs, p, "known_one");
                     for (const Pair& e : k.pairs) ones.insert(normalized(e));
                   },
                   [&](const DegreeBounds& d) {
                     if (d.lower.size() != p || d.upper.size() != p) {
                       fail(ErrorKind::kInvalidInput, "degree bounds need one entry per node");
                     }
                     for (std::size_t i = 0; i < p; ++i) {
                       if (d.lower[i] > d.upper[i] || d.upper[i] + 1 > p) {
                         fail(ErrorKind::kInvalidInput,
                              "degree bounds must satisfy 0 <= l_i <= u_i <= p-1 (node " +
                                  std::to_string(i) + ")");
                       }
                     }
                   },
                   [&](const AverageDegree& a) {
                     if (!(a.slack >= 0.0) || !std::isfinite(a.target)) {
                       fail(ErrorKind::kInvalidInput, "average degree needs finite target, slack >= 0");
                     }
                   },
                   [&](const Hubs& h) {
                     if (h.d_low > h.d_high || h.d_high + 1 > p) {
                       fail(ErrorKind::kInvalidInput, "hubs need 0 <= d_low <= d_high <= p-1");
                     }
                   },
               },
               c);
  }
  for (const Pair& e : zeros) {
    if (ones.count(e) != 0) {
      fail(ErrorKind::kInvalidInput, "pair (" + std::to_string(e.i) + "," + std::to_string(e.j) +
                                         ") is both known zero and known one");
    }
  }
}

CountWindow pair_count_window(const AverageDegree& c, std::size_t p) {
  const double half_p = 0.5 * static_cast<double>(p);
  const double lo = std::ceil(half_p * (c.target - c.slack) - 1e-9);
  const double hi = std::floor(half_p * (c.target + c.slack) + 1e-9);
  CountWindow w;
  w.lo = lo <= 0.0 ? 0 : static_cast<std::size_t>(lo);
  w.hi = hi < 0.0 ? 0 : static_cast<std::size_t>(hi);
  if (hi < 0.0) {
    // Empty window: no support can satisfy it.
    w.lo = 1;
    w.hi = 0;
  }
  return w;
}

bool check_complete(const Support& z, const Constraints& cs) {
  const std::size_t p = z.dim();
  const std::vector<std::size_t> deg = z.degrees();
  for (const auto& c : cs) {
    const bool ok = std::visit(
        Overloaded{
            [&](const KnownZero& k) {
              return std::none_of(k.pairs.begin(), k.pairs.end(),
                                  [&](const Pair& e) { return z.contains(e.i, e.j); });
            },
            [&](const KnownOne& k) {
              return std::all_of(k.pairs.begin(), k.pairs.end(),
                                 [&](const Pair& e) { return z.contains(e.i, e.j); });
            },
            [&](const DegreeBounds& d) {
              for (std::size_t i = 0; i < p; ++i) {
                if (deg[i] < d.lower[i] || deg[i] > d.upper[i]) return false;
              }
              return true;
            },
            [&](const AverageDegree& a) {
              const CountWindow w = pair_count_window(a, p);
              return z.size() >= w.lo && z.size() <= w.hi;
            },
            [&](const Hubs& h) {
              std::size_t hubs = 0;
              for (std::size_t i = 0; i < p; ++i) {
                if (deg[i] > h.d_high) return false;
                if (deg[i] > h.d_low) ++hubs;
              }
              return hubs <= h.max_hubs;
            },
        },
        c);
    if (!ok) return false;
  }
  return true;
}

Feasibility prune_partial(const PartialAssignment& node, const Constraints& cs) {
  if (cs.empty()) return Feasibility::kFeasible;
  const std::size_t p = node.dim;
  std::vector<std::size_t> deg_one(p, 0), free_inc(p, 0);
  std::size_t n_one = 0, n_free = 0;
  std::size_t idx = 0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j, ++idx) {
      const signed char s = node.state[idx];
      if (s > 0) {
        ++deg_one[i];
        ++deg_one[j];
        ++n_one;
      } else if (s < 0) {
        ++free_inc[i];
        ++free_inc[j];
        ++n_free;
      }
    }
  }
  const std::size_t budget = node.budget_left;
  auto state_of = [&](const Pair& e) {
    const Pair n = normalized(e);
    return node.state[pair_index(n.i, n.j, p)];
  };

  for (const auto& c : cs) {
    const bool feasible = std::visit(
        Overloaded{
            [&](const KnownZero& k) {
              return std::none_of(k.pairs.begin(), k.pairs.end(),
                                  [&](const Pair& e) { return state_of(e) > 0; });
            },
            [&](const KnownOne& k) {
              std::size_t pending = 0;
              for (const Pair& e : k.pairs) {
                const signed char s = state_of(e);
                if (s == 0) return false;
                if (s < 0) ++pending;
              }
              return pending <= budget;
            },
            [&](const DegreeBounds& d) {
              std::size_t deficit = 0;
              for (std::size_t i = 0; i < p; ++i) {
                if (deg_one[i] > d.upper[i]) return false;
                if (deg_one[i] + std::min(free_inc[i], budget) < d.lower[i]) return false;
                if (d.lower[i] > deg_one[i]) deficit += d.lower[i] - deg_one[i];
              }
              // Each added pair raises the degree sum by two.
              return (deficit + 1) / 2 <= budget;
            },
            [&](const AverageDegree& a) {
              const CountWindow w = pair_count_window(a, p);
              return n_one <= w.hi && n_one + std::min(budget, n_free) >= w.lo;
            },
            [&](const Hubs& h) {
              std::size_t hubs = 0;
              for (std::size_t i = 0; i < p; ++i) {
                if (deg_one[i] > h.d_high) return false;
                if (deg_one[i] > h.d_low) ++hubs;
              }
              return hubs <= h.max_hubs;
            },
        },
        c);
    if (!feasible) return Feasibility::kInfeasible;
  }
  return Feasibility::kFeasible;
}

Feasibility prune_partial(std::size_t p, std::span<const Pair> fixed_one,
                          std::span<const Pair> fixed_zero, std::size_t budget_left,
                          const Constraints& cs) {
  std::vector<signed char> state(pair_count(p), -1);
  for (const Pair& e : fixed_one) {
    const Pair n = normalized(e);
    state[pair_index(n.i, n.j, p)] = 1;
  }
  for (const Pair& e : fixed_zero) {
    const Pair n = normalized(e);
    state[pair_index(n.i, n.j, p)] = 0;
  }
  return prune_partial(PartialAssignment{p, state, budget_left}, cs);
}

AdditionGuard::AdditionGuard(std::size_t p, const Constraints& cs)
    : p_(p),
      degree_cap_(p, p > 0 ? p - 1 : 0),
      forbidden_(pair_count(p), 0),
      count_cap_(pair_count(p)),
      degree_(p, 0) {
  for (const auto& c : cs) {
    std::visit(Overloaded{
                   [&](const KnownZero& k) {
                     for (const Pair& e : k.pairs) {
                       const Pair n = normalized(e);
                       forbidden_[pair_index(n.i, n.j, p_)] = 1;
                     }
                   },
                   [&](const KnownOne&) {},
                   [&](const DegreeBounds& d) {
                     for (std::size_t i = 0; i < p_; ++i) {
                       degree_cap_[i] = std::min(degree_cap_[i], d.upper[i]);
                     }
                   },
                   [&](const AverageDegree& a) {
                     count_cap_ = std::min(count_cap_, pair_count_window(a, p_).hi);
                   },
                   [&](const Hubs& h) {
                     // With several hub constraints the tightest one is kept.
                     if (!has_hubs_ || h.max_hubs < hubs_.max_hubs) hubs_ = h;
                     has_hubs_ = true;
                     for (std::size_t i = 0; i < p_; ++i) {
                       degree_cap_[i] = std::min(degree_cap_[i], h.d_high);
                     }
                   },
               },
               c);
  }
}

void AdditionGuard::reset() {
  std::fill(degree_.begin(), degree_.end(), 0);
  hubs_used_ = 0;
  count_ = 0;
}

bool AdditionGuard::allowed_degree(std::size_t node, std::size_t new_degree,
                                   std::size_t extra_hubs) const {
  if (new_degree > degree_cap_[node]) return false;
  if (has_hubs_ && hubs_used_ + extra_hubs > hubs_.max_hubs) return false;
  return true;
}

bool AdditionGuard::can_add(const Pair& e) const {
  if (count_ + 1 > count_cap_) return false;
  if (forbidden_[pair_index(e.i, e.j, p_)] != 0) return false;
  std::size_t extra = 0;
  if (has_hubs_) {
    if (degree_[e.i] == hubs_.d_low) ++extra;
    if (degree_[e.j] == hubs_.d_low) ++extra;
  }
  return allowed_degree(e.i, degree_[e.i] + 1, extra) &&
         allowed_degree(e.j, degree_[e.j] + 1, extra);
}

void AdditionGuard::add(const Pair& e) {
  if (has_hubs_) {
    if (degree_[e.i] == hubs_.d_low) ++hubs_used_;
    if (degree_[e.j] == hubs_.d_low) ++hubs_used_;
  }
  ++degree_[e.i];
  ++degree_[e.j];
  ++count_;
}

}  // namespace certprec
