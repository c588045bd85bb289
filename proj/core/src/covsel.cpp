#include "certprec/covsel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "certprec/error.hpp"

namespace certprec {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Newton polish is used when the free coordinates fit a dense Hessian.
constexpr std::size_t kNewtonMaxVars = 400;
constexpr int kNewtonSteps = 30;

struct Roots {
  std::array<double, 3> value{};
  int count = 0;
  void push(double v) { value[count++] = v; }
};

Roots real_quadratic_roots(double a, double b, double c) {
  Roots out;
  if (a == 0.0) {
    if (b != 0.0) out.push(-c / b);
    return out;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return out;
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  if (q == 0.0) {
    out.push(0.0);
    return out;
  }
  out.push(q / a);
  out.push(c / q);
  return out;
}

// Real roots of c3 t^3 + c2 t^2 + c1 t + c0, each refined by Newton steps on
// the polynomial.
Roots real_cubic_roots(double c3, double c2, double c1, double c0) {
  const double scale = std::max({std::abs(c2), std::abs(c1), std::abs(c0)});
  if (std::abs(c3) <= 1e-14 * scale) return real_quadratic_roots(c2, c1, c0);
  const double a = c2 / c3, b = c1 / c3, c = c0 / c3;
  const double q = (a * a - 3.0 * b) / 9.0;
  const double r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
  Roots out;
  if (r * r < q * q * q) {
    const double theta = std::acos(std::clamp(r / std::sqrt(q * q * q), -1.0, 1.0));
    const double m = -2.0 * std::sqrt(q);
    constexpr double kTwoPi = 6.283185307179586;
    out.push(m * std::cos(theta / 3.0) - a / 3.0);
    out.push(m * std::cos((theta + kTwoPi) / 3.0) - a / 3.0);
    out.push(m * std::cos((theta - kTwoPi) / 3.0) - a / 3.0);
  } else {
    const double big = -std::copysign(std::cbrt(std::abs(r) + std::sqrt(r * r - q * q * q)), r);
    const double small = big != 0.0 ? q / big : 0.0;
    out.push(big + small - a / 3.0);
  }
  for (int k = 0; k < out.count; ++k) {
    double t = out.value[k];
    for (int it = 0; it < 3; ++it) {
      const double f = ((t + a) * t + b) * t + c;
      const double df = (3.0 * t + 2.0 * a) * t + b;
      if (df == 0.0) break;
      t -= f / df;
    }
    out.value[k] = t;
  }
  return out;
}

// Root of a strictly increasing derivative on the open interval (lo, hi),
// starting from `guess`; Newton steps with bisection fallback.
template <class Fp, class Fpp>
double solve_increasing(Fp&& fp, Fpp&& fpp, double lo, double hi, double guess) {
  double left = lo, right = hi;
  auto midpoint = [&]() {
    if (std::isfinite(left) && std::isfinite(right)) return 0.5 * (left + right);
    if (std::isfinite(left)) return left + std::max(1.0, std::abs(left));
    if (std::isfinite(right)) return right - std::max(1.0, std::abs(right));
    return 0.0;
  };
  double t = (guess > left && guess < right) ? guess : midpoint();
  for (int it = 0; it < 200; ++it) {
    const double g = fp(t);
    if (g == 0.0) return t;
    if (g < 0.0) {
      left = t;
    } else {
      right = t;
    }
    const double h = fpp(t);
    double next = h > 0.0 ? t - g / h : midpoint();
    if (!(next > left && next < right)) next = midpoint();
    if (std::abs(next - t) <= 4e-16 * std::max(1.0, std::abs(t))) return next;
    t = next;
  }
  return t;
}

}  // namespace

const char* to_string(CovSelStatus status) {
  switch (status) {
    case CovSelStatus::kConverged: return "converged";
    case CovSelStatus::kStalled: return "stalled";
    case CovSelStatus::kIterationLimit: return "iteration_limit";
  }
  return "unknown";
}

EntryPenalty EntryPenalty::of(const Regularizer& reg, std::size_t i, std::size_t j) {
  if (const auto* r = std::get_if<Ridge>(&reg)) return ridge(r->gamma);
  return box(std::get<BigM>(reg).bounds(i, j));
}

CoordinateStep off_diagonal_step(double sigma_ij, double w_ii, double w_jj, double w_ij,
                                 double theta_ij, EntryPenalty pen) {
  const double a = w_ij;
  const double s = std::sqrt(w_ii * w_jj);
  // 1 + 2 a t + b t^2 > 0 on (lo, hi); b = -(s - a)(s + a).
  const double b = -(s - a) * (s + a);
  const double lo = s + a > 0.0 ? -1.0 / (s + a) : -kInf;
  const double hi = s - a > 0.0 ? 1.0 / (s - a) : kInf;
  const bool ridge = pen.kind == EntryPenalty::Kind::kRidge;
  const double inv_gamma = ridge ? 1.0 / pen.param : 0.0;

  auto q = [&](double t) { return 1.0 + t * (2.0 * a + b * t); };
  auto objective = [&](double t) {
    double f = 2.0 * sigma_ij * t - std::log1p(t * (2.0 * a + b * t));
    if (ridge) f += inv_gamma * t * (2.0 * theta_ij + t);
    return f;
  };
  auto fp = [&](double t) {
    double g = 2.0 * sigma_ij - (2.0 * a + 2.0 * b * t) / q(t);
    if (ridge) g += 2.0 * inv_gamma * (theta_ij + t);
    return g;
  };
  auto fpp = [&](double t) {
    const double qt = q(t);
    const double dq = 2.0 * a + 2.0 * b * t;
    double h = (dq * dq - 2.0 * b * qt) / (qt * qt);
    if (ridge) h += 2.0 * inv_gamma;
    return h;
  };

  // Closed-form candidates: stationarity multiplied through by q(t).
  Roots roots;
  if (ridge) {
    const double g = 2.0 * inv_gamma;
    roots = real_cubic_roots(g * b, g * theta_ij * b + 2.0 * g * a + 2.0 * sigma_ij * b,
                             2.0 * g * theta_ij * a + g + 4.0 * sigma_ij * a - 2.0 * b,
                             g * theta_ij + 2.0 * sigma_ij - 2.0 * a);
  } else {
    roots = real_quadratic_roots(sigma_ij * b, 2.0 * sigma_ij * a - b, sigma_ij - a);
  }
  double guess = std::numeric_limits<double>::quiet_NaN();
  double best_residual = kInf;
  for (int k = 0; k < roots.count; ++k) {
    const double t = roots.value[k];
    if (!(t > lo && t < hi)) continue;
    const double res = std::abs(fp(t));
    if (res < best_residual) {
      best_residual = res;
      guess = t;
    }
  }
  double t = solve_increasing(fp, fpp, lo, hi, guess);

  if (!ridge && std::isfinite(pen.param)) {
    t = std::clamp(t, -pen.param - theta_ij, pen.param - theta_ij);
  }
  const double decrease = -objective(t);
  if (!(decrease > 0.0)) return {};
  return {t, decrease};
}

CoordinateStep diagonal_step(double sigma_ii, double w_ii, double theta_ii, EntryPenalty pen) {
  double t = 0.0;
  const bool ridge = pen.kind == EntryPenalty::Kind::kRidge;
  if (ridge) {
    // In s = 1 + 2 w t > 0: (2/(gamma w)) s^2 + (2 sigma + (2/gamma)(theta - 1/w)) s - 2 w = 0.
    const double inv_gamma = 1.0 / pen.param;
    const double qa = 2.0 * inv_gamma / w_ii;
    const double qb = 2.0 * sigma_ii + 2.0 * inv_gamma * (theta_ii - 1.0 / w_ii);
    const double qc = -2.0 * w_ii;
    const double root_d = std::sqrt(qb * qb - 4.0 * qa * qc);
    const double s = qb >= 0.0 ? -2.0 * qc / (qb + root_d) : (-qb + root_d) / (2.0 * qa);
    t = (s - 1.0) / (2.0 * w_ii);
  } else {
    t = 0.5 * (1.0 / sigma_ii - 1.0 / w_ii);
    if (std::isfinite(pen.param)) t = std::min(t, 0.5 * (pen.param - theta_ii));
  }
  double f = 2.0 * sigma_ii * t - std::log1p(2.0 * w_ii * t);
  if (ridge) f += (2.0 * t * (theta_ii + t)) / pen.param;
  const double decrease = -f;
  if (!(decrease > 0.0)) return {};
  return {t, decrease};
}

double primal_objective(const SymmetricMatrix& sigma, const SymmetricMatrix& theta,
                        const Regularizer& reg) {
  return inner(sigma, theta) - log_det(cholesky(theta)) + penalty(reg, theta);
}

SymmetricMatrix dual_point(const SymmetricMatrix& sigma, const SymmetricMatrix& theta) {
  return inverse_spd(theta) - sigma;
}

namespace {

// D_i = sqrt(Sigma_ii / W_ii) on rows whose big-M diagonal bound is infinite.
std::vector<double> dual_scaling(const SymmetricMatrix& sigma, const SymmetricMatrix& w,
                                 const Regularizer& reg) {
  std::vector<double> d(sigma.dim(), 1.0);
  if (const auto* m = std::get_if<BigM>(&reg)) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (std::isinf(m->bounds(i, i))) d[i] = std::sqrt(sigma(i, i) / w(i, i));
    }
  }
  return d;
}

}  // namespace

SymmetricMatrix feasible_dual_point(const SymmetricMatrix& sigma, const SymmetricMatrix& w,
                                    const Support& z, const Regularizer& reg) {
  const std::size_t p = sigma.dim();
  const std::vector<double> d = dual_scaling(sigma, w, reg);
  SymmetricMatrix r(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) r.set(i, j, d[i] * d[j] * w(i, j) - sigma(i, j));
  }
  if (const auto* m = std::get_if<BigM>(&reg)) {
    for (std::size_t i = 0; i < p; ++i) {
      if (std::isinf(m->bounds(i, i))) r.set(i, i, 0.0);
    }
    for (const Pair& e : z.pairs()) {
      if (std::isinf(m->bounds(e.i, e.j))) r.set(e.i, e.j, 0.0);
    }
  }
  return r;
}

SymmetricMatrix completion_dual_point(const SymmetricMatrix& sigma, const SymmetricMatrix& w,
                                      const SymmetricMatrix& theta, const Support& z,
                                      const BigM& reg) {
  const std::size_t p = sigma.dim();
  SymmetricMatrix r = w - sigma;
  auto inactive = [&](std::size_t i, std::size_t j) {
    return std::abs(theta(i, j)) < reg.bounds(i, j) * (1.0 - 1e-9);
  };
  for (std::size_t i = 0; i < p; ++i) {
    if (inactive(i, i)) r.set(i, i, 0.0);
  }
  for (const Pair& e : z.pairs()) {
    if (inactive(e.i, e.j)) r.set(e.i, e.j, 0.0);
  }
  return r;
}

double dual_value(const SymmetricMatrix& sigma, const SymmetricMatrix& r, const Support& z,
                  const Regularizer& reg) {
  const std::size_t p = sigma.dim();
  const double ld = log_det(cholesky(sigma + r));
  double conj = 0.0;
  for (std::size_t i = 0; i < p; ++i) conj += conjugate(reg, i, i, r(i, i));
  for (const Pair& e : z.pairs()) conj += 2.0 * conjugate(reg, e.i, e.j, r(e.i, e.j));
  return static_cast<double>(p) + ld - conj;
}

CovSelSolution solve_covsel(const SymmetricMatrix& sigma, const Support& z,
                            const Regularizer& reg, const CovSelOptions& options) {
  const std::size_t p = sigma.dim();
  if (p == 0) fail(ErrorKind::kInvalidInput, "covsel: empty covariance");
  if (z.dim() != p) fail(ErrorKind::kInvalidInput, "covsel: support dimension mismatch");
  if (!(options.gap_tol > 0.0)) fail(ErrorKind::kInvalidInput, "covsel: gap_tol must be > 0");
  for (std::size_t i = 0; i < p; ++i) {
    if (!(sigma(i, i) > 0.0)) {
      fail(ErrorKind::kInvalidInput,
           "covsel: covariance has nonpositive diagonal at index " + std::to_string(i));
    }
  }
  validate(reg, p);

  const auto& pairs = z.pairs();
  const std::size_t max_iter =
      options.max_iter > 0 ? options.max_iter : 2000 * (p + pairs.size());

  std::vector<EntryPenalty> diag_pen(p);
  std::vector<EntryPenalty> pair_pen(pairs.size());
  for (std::size_t i = 0; i < p; ++i) diag_pen[i] = EntryPenalty::of(reg, i, i);
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    pair_pen[e] = EntryPenalty::of(reg, pairs[e].i, pairs[e].j);
  }

  const auto* ridge = std::get_if<Ridge>(&reg);
  const auto* bigm = std::get_if<BigM>(&reg);
  bool cheap_dual = true;
  if (bigm != nullptr) {
    for (const Pair& e : pairs) {
      if (std::isinf(bigm->bounds(e.i, e.j))) cheap_dual = false;
    }
  }

  std::vector<double> init(p);
  for (std::size_t i = 0; i < p; ++i) init[i] = std::min(1.0 / sigma(i, i), diag_pen[i].param);
  if (ridge != nullptr) {
    for (std::size_t i = 0; i < p; ++i) init[i] = 1.0 / sigma(i, i);
  }
  InverseTracker tracker(SymmetricMatrix::diagonal(init), options.refresh_every);

  auto exact_primal = [&]() {
    double v = inner(sigma, tracker.theta()) - tracker.log_det();
    if (ridge != nullptr) {
      const double n = norm_l2(tracker.theta());
      v += n * n / (2.0 * ridge->gamma);
    }
    return v;
  };

  // Dual objective at the scaled point of feasible_dual_point in O(p + |z|),
  // using log det W = -log det Theta from the tracker.
  auto fast_dual = [&]() {
    const SymmetricMatrix& w = tracker.inverse();
    double ld = -tracker.log_det();
    double conj = 0.0;
    if (ridge != nullptr) {
      for (std::size_t i = 0; i < p; ++i) {
        const double r = w(i, i) - sigma(i, i);
        conj += 0.5 * ridge->gamma * r * r;
      }
      for (const Pair& e : pairs) {
        const double r = w(e.i, e.j) - sigma(e.i, e.j);
        conj += ridge->gamma * r * r;
      }
      return static_cast<double>(p) + ld - conj;
    }
    thread_local std::vector<double> d;
    d.assign(p, 1.0);
    for (std::size_t i = 0; i < p; ++i) {
      const double m = bigm->bounds(i, i);
      if (std::isinf(m)) {
        d[i] = std::sqrt(sigma(i, i) / w(i, i));
        ld += std::log(sigma(i, i) / w(i, i));
      } else {
        conj += m * std::abs(w(i, i) - sigma(i, i));
      }
    }
    for (const Pair& e : pairs) {
      const double r = d[e.i] * d[e.j] * w(e.i, e.j) - sigma(e.i, e.j);
      conj += 2.0 * bigm->bounds(e.i, e.j) * std::abs(r);
    }
    return static_cast<double>(p) + ld - conj;
  };

  // Best of the scaled point and, for big-M, the completion point. Near the
  // optimum the latter's gap is quadratic in the residual, the former's linear.
  auto certify = [&](CovSelSolution& out) {
    auto value_of = [&](const SymmetricMatrix& r) {
      try {
        return dual_value(sigma, r, z, reg);
      } catch (const Error&) {
        return -kInf;
      }
    };
    out.dual_point = feasible_dual_point(sigma, tracker.inverse(), z, reg);
    out.dual_value = value_of(out.dual_point);
    if (bigm != nullptr) {
      SymmetricMatrix r = completion_dual_point(sigma, tracker.inverse(), tracker.theta(), z, *bigm);
      const double v = value_of(r);
      if (v > out.dual_value) {
        out.dual_value = v;
        out.dual_point = std::move(r);
      }
    }
  };

  // Damped Newton step on the free coordinates: the diagonal and support
  // pairs strictly inside their box. A pair variable moves both symmetric
  // entries. Returns false when no decrease is found.
  auto newton_step = [&]() {
    const SymmetricMatrix& w = tracker.inverse();
    const SymmetricMatrix& theta = tracker.theta();
    std::vector<Pair> vars;
    auto free_entry = [&](std::size_t i, std::size_t j) {
      return bigm == nullptr || std::abs(theta(i, j)) < bigm->bounds(i, j) * (1.0 - 1e-9);
    };
    for (std::size_t i = 0; i < p; ++i) {
      if (free_entry(i, i)) vars.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i)});
    }
    for (const Pair& e : pairs) {
      if (free_entry(e.i, e.j)) vars.push_back(e);
    }
    const std::size_t m = vars.size();
    if (m == 0) return false;
    const double inv_gamma = ridge != nullptr ? 1.0 / ridge->gamma : 0.0;
    std::vector<double> g(m);
    SymmetricMatrix h(m);
    for (std::size_t a = 0; a < m; ++a) {
      const auto [i, j] = vars[a];
      const double mult = i == j ? 1.0 : 2.0;
      g[a] = mult * (sigma(i, j) - w(i, j) + inv_gamma * theta(i, j));
      for (std::size_t b = a; b < m; ++b) {
        const auto [k, l] = vars[b];
        // tr(W E_a W E_b) with E_ii = e_i e_i^T and E_ij = e_i e_j^T + e_j e_i^T.
        double v;
        if (i == j && k == l) {
          v = w(i, k) * w(i, k);
        } else if (i == j) {
          v = 2.0 * w(i, k) * w(i, l);
        } else if (k == l) {
          v = 2.0 * w(k, i) * w(k, j);
        } else {
          v = 2.0 * (w(j, k) * w(i, l) + w(j, l) * w(i, k));
        }
        if (a == b) v += mult * inv_gamma;
        h.set(a, b, v);
      }
    }
    std::vector<double> d(g);
    try {
      cholesky(h).solve_in_place(d);
    } catch (const Error&) {
      return false;
    }
    double slope = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      d[a] = -d[a];
      slope += g[a] * d[a];
    }
    if (!(slope < 0.0)) return false;
    double alpha = 1.0;
    if (bigm != nullptr) {
      for (std::size_t a = 0; a < m; ++a) {
        const auto [i, j] = vars[a];
        const double bound = bigm->bounds(i, j);
        if (d[a] == 0.0 || std::isinf(bound)) continue;
        const double room = (d[a] > 0.0 ? bound : -bound) - theta(i, j);
        alpha = std::min(alpha, (1.0 - 1e-12) * room / d[a]);
      }
    }
    const double current = exact_primal();
    for (int halving = 0; halving < 40; ++halving, alpha *= 0.5) {
      SymmetricMatrix trial = theta;
      for (std::size_t a = 0; a < m; ++a) {
        trial.set(vars[a].i, vars[a].j, theta(vars[a].i, vars[a].j) + alpha * d[a]);
      }
      double value;
      try {
        value = primal_objective(sigma, trial, reg);
      } catch (const Error&) {
        continue;
      }
      if (value <= current + 1e-4 * alpha * slope && value < current) {
        tracker = InverseTracker(std::move(trial), options.refresh_every);
        return true;
      }
    }
    return false;
  };
  const bool use_newton = options.newton_polish && p + pairs.size() <= kNewtonMaxVars;

  CovSelSolution sol;
  double primal = exact_primal();
  // The full big-M certificate costs O(p^3); trying it every p + |z|
  // iterations keeps its amortized cost at the O(p^2) of an update.
  const std::size_t check_every = p + pairs.size();
  std::size_t next_check = check_every;
  std::size_t iter = 0;
  std::size_t last_refresh_count = tracker.refreshes();
  CovSelStatus status = CovSelStatus::kIterationLimit;

  for (int attempt = 0; attempt < 4; ++attempt) {
    status = CovSelStatus::kIterationLimit;
    while (iter < max_iter) {
      if (cheap_dual && primal - fast_dual() <= options.gap_tol) {
        status = CovSelStatus::kConverged;
        break;
      }
      if ((bigm != nullptr || use_newton) && iter >= next_check) {
        next_check = iter + check_every;
        bool done = false;
        for (int step = 0; step <= kNewtonSteps; ++step) {
          CovSelSolution probe;
          certify(probe);
          if (exact_primal() - probe.dual_value <= options.gap_tol) {
            done = true;
            break;
          }
          if (!use_newton || step == kNewtonSteps || !newton_step()) break;
        }
        last_refresh_count = tracker.refreshes();
        primal = exact_primal();
        if (done) {
          status = CovSelStatus::kConverged;
          break;
        }
      }
      const SymmetricMatrix& w = tracker.inverse();
      const SymmetricMatrix& theta = tracker.theta();
      CoordinateStep best;
      std::size_t best_i = 0, best_j = 0;
      for (std::size_t i = 0; i < p; ++i) {
        const CoordinateStep s = diagonal_step(sigma(i, i), w(i, i), theta(i, i), diag_pen[i]);
        if (s.decrease > best.decrease) {
          best = s;
          best_i = best_j = i;
        }
      }
      for (std::size_t e = 0; e < pairs.size(); ++e) {
        const std::size_t i = pairs[e].i, j = pairs[e].j;
        const CoordinateStep s = off_diagonal_step(sigma(i, j), w(i, i), w(j, j), w(i, j),
                                                   theta(i, j), pair_pen[e]);
        if (s.decrease > best.decrease) {
          best = s;
          best_i = i;
          best_j = j;
        }
      }
      if (!(best.decrease >= options.improve_tol)) {
        status = CovSelStatus::kStalled;
        break;
      }
      tracker.update(best_i, best_j, best.t);
      ++iter;
      if (tracker.refreshes() != last_refresh_count) {
        last_refresh_count = tracker.refreshes();
        primal = exact_primal();
      } else {
        primal -= best.decrease;
      }
    }

    // Exact line search along Theta -> c Theta. At the optimum over c,
    // <Sigma, Theta> + ||Theta||^2 / gamma = p (ridge) or <Sigma, Theta> = p
    // (box, when no bound becomes active), and the objective never rises.
    {
      const SymmetricMatrix& theta = tracker.theta();
      const double a = inner(sigma, theta);
      const double dp = static_cast<double>(p);
      double c = 1.0;
      if (ridge != nullptr) {
        const double b = norm_l2(theta) * norm_l2(theta) / ridge->gamma;
        c = 2.0 * dp / (a + std::sqrt(a * a + 4.0 * dp * b));
      } else if (a > 0.0) {
        c = dp / a;
        for (std::size_t i = 0; i < p; ++i) {
          for (std::size_t j = i; j < p; ++j) {
            const double v = std::abs(theta(i, j));
            if (v > 0.0) c = std::min(c, std::max(1.0, bigm->bounds(i, j) / v));
          }
        }
      }
      if (c > 0.0 && std::isfinite(c) && c != 1.0) {
        tracker = InverseTracker(c * theta, options.refresh_every);
      } else {
        tracker.refresh();
      }
    }
    last_refresh_count = tracker.refreshes();
    primal = exact_primal();
    certify(sol);
    sol.gap = primal - sol.dual_value;
    if (sol.gap <= options.gap_tol) {
      status = CovSelStatus::kConverged;
      break;
    }
    // Only a cheap-gap convergence that the exact certificate disagrees with
    // is worth another pass.
    if (status != CovSelStatus::kConverged) break;
    status = CovSelStatus::kStalled;
  }

  sol.theta = tracker.theta();
  sol.w_inv = tracker.inverse();
  sol.primal_value = primal;
  sol.iterations = iter;
  sol.status = status;
  return sol;
}

}  // namespace certprec
