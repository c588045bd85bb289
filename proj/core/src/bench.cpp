#include "certprec/bench.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "certprec/covsel.hpp"
#include "certprec/error.hpp"
#include "certprec/io.hpp"

namespace certprec {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_fraction(double t) {
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::kInvalidInput, "t must lie in [0, 1]");
}

struct Scored {
  const GridCell* cell = nullptr;
  double value = 0.0;
};

double criterion_value(Criterion c, const SymmetricMatrix& theta, const SyntheticInstance& inst) {
  return c == Criterion::kEbic ? ebic(theta, inst.sigma_train, inst.n, inst.p)
                               : holdout_nll(theta, inst.sigma_val);
}

// Same selection rule as tune(): minimum criterion, then smaller k, then
// smaller multiplier.
Scored select_cell(const std::vector<GridCell>& grid, Criterion c, const SyntheticInstance& inst) {
  Scored best;
  for (const GridCell& cell : grid) {
    if (!cell.ok) continue;
    const double v = criterion_value(c, cell.result.theta, inst);
    if (best.cell == nullptr || v < best.value ||
        (v == best.value && (cell.k < best.cell->k ||
                             (cell.k == best.cell->k && cell.multiplier < best.cell->multiplier)))) {
      best = {&cell, v};
    }
  }
  return best;
}

void run_exact(const ExperimentConfig& cfg, const SyntheticInstance& inst, Method method,
               const std::vector<std::size_t>& ks, std::vector<ResultRow>& out) {
  const auto t0 = Clock::now();
  TuningData data{inst.sigma_train, inst.n, inst.sigma_val};
  TuningGrid grid{ks, cfg.multipliers, cfg.criteria.front()};
  const RegKind kind = method == Method::kBigM ? RegKind::kBigM : RegKind::kRidge;
  std::vector<ResultRow> rows(cfg.criteria.size());
  for (std::size_t c = 0; c < cfg.criteria.size(); ++c) {
    rows[c].seed = inst.seed;
    rows[c].method = method;
    rows[c].criterion = cfg.criteria[c];
  }
  try {
    const TunedModel tuned = tune(data, grid, kind, cfg.solve);
    double cut_time = 0.0;
    for (const GridCell& cell : tuned.grid) {
      if (cell.ok) cut_time += cell.result.times.subproblem_s;
    }
    const double total = seconds_since(t0);
    for (std::size_t c = 0; c < cfg.criteria.size(); ++c) {
      const Scored s = select_cell(tuned.grid, cfg.criteria[c], inst);
      ResultRow& row = rows[c];
      row.ok = true;
      row.metrics = score(s.cell->result, inst);
      row.objective = s.cell->result.upper;
      row.lower_bound = s.cell->result.lower;
      row.gap = s.cell->result.relative_gap;
      row.time_total_s = total;
      row.time_cuts_s = cut_time;
      row.cuts = s.cell->result.cut_pool_size;
      row.nodes = s.cell->result.nodes_explored;
      row.support = s.cell->result.support;
    }
  } catch (const std::exception& e) {
    for (ResultRow& row : rows) row.error = e.what();
  }
  out.insert(out.end(), rows.begin(), rows.end());
}

// Neighborhood-selection baseline: the lasso support at each budget, refit by
// ridge-regularized covariance selection at gamma0.
void run_neighborhood(const ExperimentConfig& cfg, const SyntheticInstance& inst,
                      const std::vector<std::size_t>& ks, std::vector<ResultRow>& out) {
  const auto t0 = Clock::now();
  struct Fit {
    std::size_t k;
    Support z;
    CovSelSolution sol;
  };
  std::vector<Fit> fits;
  std::string error;
  double cut_time = 0.0;
  try {
    const Ridge reg{base_scales(inst.sigma_train).gamma0};
    CovSelOptions opts = cfg.solve.covsel;
    for (const std::size_t k : ks) {
      Support z = warm_start(inst.sigma_train, k);
      const auto t1 = Clock::now();
      CovSelSolution sol = solve_covsel(inst.sigma_train, z, reg, opts);
      cut_time += seconds_since(t1);
      fits.push_back(Fit{k, std::move(z), std::move(sol)});
    }
  } catch (const std::exception& e) {
    error = e.what();
    fits.clear();
  }
  const double total = seconds_since(t0);
  for (const Criterion c : cfg.criteria) {
    ResultRow row;
    row.seed = inst.seed;
    row.method = Method::kNeighborhood;
    row.criterion = c;
    row.error = error;
    const Fit* best = nullptr;
    double best_v = 0.0;
    for (const Fit& f : fits) {
      const double v = criterion_value(c, f.sol.theta, inst);
      if (best == nullptr || v < best_v || (v == best_v && f.k < best->k)) {
        best = &f;
        best_v = v;
      }
    }
    if (best != nullptr) {
      row.ok = true;
      row.metrics = score(best->sol.theta, best->z, inst);
      row.metrics.k_selected = best->k;
      row.objective = best->sol.primal_value;
      row.lower_bound = best->sol.dual_value;
      row.gap = (best->sol.primal_value - best->sol.dual_value) /
                std::max(1.0, std::abs(best->sol.primal_value));
      row.time_total_s = total;
      row.time_cuts_s = cut_time;
      row.support = best->z;
    }
    out.push_back(std::move(row));
  }
}

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
};

Stats stats_of(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct Column {
  const char* name;
  bool timing;
  double (*get)(const ResultRow&);
};

const Column kColumns[] = {
    {"k_selected", false, [](const ResultRow& r) { return static_cast<double>(r.metrics.k_selected); }},
    {"A", false, [](const ResultRow& r) { return r.metrics.accuracy; }},
    {"FDR", false, [](const ResultRow& r) { return r.metrics.fdr; }},
    {"nll_test", false, [](const ResultRow& r) { return r.metrics.nll_test; }},
    {"objective", false, [](const ResultRow& r) { return r.objective; }},
    {"lower_bound", false, [](const ResultRow& r) { return r.lower_bound; }},
    {"gap", false, [](const ResultRow& r) { return r.gap; }},
    {"time_total_s", true, [](const ResultRow& r) { return r.time_total_s; }},
    {"time_cuts_s", true, [](const ResultRow& r) { return r.time_cuts_s; }},
    {"cuts", false, [](const ResultRow& r) { return static_cast<double>(r.cuts); }},
    {"nodes", false, [](const ResultRow& r) { return static_cast<double>(r.nodes); }},
};

std::string cell_text(const Column& col, const ResultRow& r, bool timings) {
  if (col.timing && !timings) return "0";
  const double v = col.get(r);
  if (std::string_view(col.name) == "k_selected" || std::string_view(col.name) == "cuts" ||
      std::string_view(col.name) == "nodes") {
    return std::to_string(static_cast<std::size_t>(v));
  }
  return format_double(v);
}

struct Group {
  Method method;
  Criterion criterion;
  std::vector<const ResultRow*> rows;
};

std::vector<Group> groups_of(const std::vector<ResultRow>& rows) {
  std::vector<Group> groups;
  for (const ResultRow& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.method == r.method && g.criterion == r.criterion;
    });
    if (it == groups.end()) {
      groups.push_back(Group{r.method, r.criterion, {}});
      it = std::prev(groups.end());
    }
    if (r.ok) it->rows.push_back(&r);
  }
  return groups;
}

}  // namespace

std::size_t pairs_for_fraction(std::size_t p, double t) {
  check_fraction(t);
  return static_cast<std::size_t>(std::floor(t * static_cast<double>(pair_count(p)) + 1e-9));
}

Support random_support(std::size_t p, std::size_t k, Rng& rng) {
  const std::size_t total = pair_count(p);
  if (k > total) fail(ErrorKind::kInvalidInput, "support size exceeds the number of pairs");
  // Partial Fisher-Yates over pair indices.
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t s = 0; s < k; ++s) {
    const std::size_t r = s + static_cast<std::size_t>(rng.below(total - s));
    std::swap(idx[s], idx[r]);
  }
  idx.resize(k);
  return Support::from_indices(p, idx);
}

DataMatrix sample_gaussian(const SymmetricMatrix& cov, std::size_t n, Rng& rng) {
  const std::size_t p = cov.dim();
  const CholeskyFactor l = cholesky(cov);
  DataMatrix x{n, p, std::vector<double>(n * p)};
  std::vector<double> g(p);
  for (std::size_t r = 0; r < n; ++r) {
    for (double& v : g) v = rng.normal();
    for (std::size_t i = 0; i < p; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j <= i; ++j) s += l(i, j) * g[j];
      x.values[r * p + i] = s;
    }
  }
  return x;
}

CovselInstance gen_covsel_instance(std::size_t p, double t, std::uint64_t seed) {
  if (p < 2) fail(ErrorKind::kInvalidInput, "p must be >= 2");
  check_fraction(t);
  SymmetricMatrix theta0(p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) theta0.set(i, j, i == j ? 2.0 : 1.0);
  }
  Rng train(seed, kStreamTrain);
  const DataMatrix x = sample_gaussian(inverse_spd(theta0), p, train);
  Rng sup(seed, kStreamSupport);
  return CovselInstance{sample_covariance(x), random_support(p, pairs_for_fraction(p, t), sup)};
}

SyntheticInstance gen_experiment_instance(std::size_t p, std::size_t n, double t,
                                          std::uint64_t seed) {
  if (p < 2 || n < 2) fail(ErrorKind::kInvalidInput, "need p >= 2 and n >= 2");
  if (!(t > 0.0 && t < 1.0)) fail(ErrorKind::kInvalidInput, "t must lie in (0, 1)");
  const std::size_t k_true = pairs_for_fraction(p, t);
  Rng sup(seed, kStreamSupport);
  SyntheticInstance inst;
  inst.n = n;
  inst.p = p;
  inst.t = t;
  inst.seed = seed;
  const double pd = static_cast<double>(p);
  bool accepted = false;
  for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
    Support z0 = random_support(p, k_true, sup);
    Eigen::MatrixXd half = Eigen::MatrixXd::Identity(p, p) * 0.5;
    for (const Pair& e : z0.pairs()) half(e.i, e.j) = half(e.j, e.i) = 0.5;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(half, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    const double delta = (lmax - pd * lmin) / (pd - 1.0);
    if (!(lmin + delta > 0.0)) continue;
    SymmetricMatrix theta(p);
    for (std::size_t i = 0; i < p; ++i) theta.set(i, i, delta + 0.5);
    for (const Pair& e : z0.pairs()) theta.set(e.i, e.j, 0.5);
    inst.theta_true = std::move(theta);
    inst.support_true = std::move(z0);
    inst.delta = delta;
    accepted = true;
  }
  if (!accepted) {
    fail(ErrorKind::kDegenerateInstance, "no admissible support after 100 attempts");
  }
  const SymmetricMatrix cov = inverse_spd(inst.theta_true);
  Rng train(seed, kStreamTrain), val(seed, kStreamValidation), test(seed, kStreamTest);
  const SymmetricMatrix s_train = sample_covariance(sample_gaussian(cov, n, train));
  const SymmetricMatrix s_val =
      sample_covariance(sample_gaussian(cov, std::max<std::size_t>(n / 2, 2), val));
  const SymmetricMatrix s_test = sample_covariance(sample_gaussian(cov, 5 * n, test));
  inst.sigma_train = standardize(s_train, s_train);
  inst.sigma_val = standardize(s_val, s_train);
  inst.sigma_test = standardize(s_test, s_train);
  return inst;
}

Metrics score(const SymmetricMatrix& theta, const Support& estimate,
              const SyntheticInstance& instance) {
  if (theta.dim() != instance.p || estimate.dim() != instance.p) {
    fail(ErrorKind::kInvalidInput, "estimate dimension does not match the instance");
  }
  std::size_t hits = 0;
  for (const Pair& e : estimate.pairs()) {
    if (instance.support_true.contains(e.i, e.j)) ++hits;
  }
  Metrics m;
  const std::size_t k_true = instance.support_true.size();
  m.accuracy = k_true == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(k_true);
  m.fdr = static_cast<double>(estimate.size() - hits) /
          static_cast<double>(std::max<std::size_t>(1, estimate.size()));
  m.nll_test = holdout_nll(theta, instance.sigma_test);
  m.k_selected = estimate.size();
  return m;
}

Metrics score(const SolveResult& result, const SyntheticInstance& instance) {
  return score(result.theta, result.support, instance);
}

const char* to_string(Method m) {
  switch (m) {
    case Method::kBigM: return "bigm";
    case Method::kRidge: return "ridge";
    case Method::kNeighborhood: return "mb";
  }
  return "unknown";
}

std::vector<std::size_t> experiment_k_grid(const ExperimentConfig& cfg, std::size_t k_true) {
  std::vector<std::size_t> ks = cfg.k_values;
  if (ks.empty()) {
    for (double f : cfg.k_factors) {
      ks.push_back(static_cast<std::size_t>(std::llround(f * static_cast<double>(k_true))));
    }
  }
  const std::size_t total = pair_count(cfg.p);
  for (auto& k : ks) k = std::min(k, total);
  std::sort(ks.begin(), ks.end(), std::greater<>());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty() || cfg.methods.empty() || cfg.criteria.empty()) {
    fail(ErrorKind::kInvalidInput, "experiment needs seeds, methods and criteria");
  }
  const std::size_t n = cfg.n == 0 ? cfg.p : cfg.n;
  const std::size_t k_true = pairs_for_fraction(cfg.p, cfg.t);
  const std::vector<std::size_t> ks = experiment_k_grid(cfg, k_true);
  if (ks.empty()) fail(ErrorKind::kInvalidInput, "empty k grid");

  std::vector<std::vector<ResultRow>> per_seed(cfg.seeds.size());
  auto run_seed = [&](std::size_t s) {
    std::vector<ResultRow>& out = per_seed[s];
    SyntheticInstance inst;
    try {
      inst = gen_experiment_instance(cfg.p, n, cfg.t, cfg.seeds[s]);
    } catch (const std::exception& e) {
      for (Method m : cfg.methods) {
        for (Criterion c : cfg.criteria) {
          ResultRow row;
          row.seed = cfg.seeds[s];
          row.method = m;
          row.criterion = c;
          row.error = e.what();
          out.push_back(std::move(row));
        }
      }
      return;
    }
    for (Method m : cfg.methods) {
      if (m == Method::kNeighborhood) {
        run_neighborhood(cfg, inst, ks, out);
      } else {
        run_exact(cfg, inst, m, ks, out);
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(cfg.threads, 1, cfg.seeds.size());
  if (workers == 1) {
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) run_seed(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t s = next++; s < cfg.seeds.size(); s = next++) run_seed(s);
      });
    }
    for (auto& th : pool) th.join();
  }
  ExperimentReport report;
  for (auto& rows : per_seed) {
    for (auto& r : rows) report.rows.push_back(std::move(r));
  }
  return report;
}

std::string ExperimentReport::csv(bool timings) const {
  std::ostringstream out;
  out << "seed,method,criterion";
  for (const Column& c : kColumns) out << ',' << c.name;
  out << '\n';
  for (const ResultRow& r : rows) {
    out << r.seed << ',' << to_string(r.method) << ',' << to_string(r.criterion);
    for (const Column& c : kColumns) out << ',' << (r.ok ? cell_text(c, r, timings) : "");
    out << '\n';
  }
  for (const Group& g : groups_of(rows)) {
    std::vector<Stats> st;
    for (const Column& c : kColumns) {
      std::vector<double> v;
      for (const ResultRow* r : g.rows) v.push_back(c.get(*r));
      st.push_back(stats_of(v));
    }
    for (int which = 0; which < 2; ++which) {
      out << (which == 0 ? "mean" : "std") << ',' << to_string(g.method) << ','
          << to_string(g.criterion);
      for (std::size_t c = 0; c < st.size(); ++c) {
        const double v = which == 0 ? st[c].mean : st[c].sd;
        out << ',' << (kColumns[c].timing && !timings ? "0" : format_double(v));
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string ExperimentReport::summary_json(bool timings) const {
  nlohmann::json groups = nlohmann::json::array();
  std::size_t failures = 0;
  for (const ResultRow& r : rows) failures += r.ok ? 0 : 1;
  for (const Group& g : groups_of(rows)) {
    nlohmann::json mean = nlohmann::json::object(), sd = nlohmann::json::object();
    for (const Column& c : kColumns) {
      std::vector<double> v;
      for (const ResultRow* r : g.rows) v.push_back(c.get(*r));
      const Stats s = stats_of(v);
      mean[c.name] = c.timing && !timings ? 0.0 : s.mean;
      sd[c.name] = c.timing && !timings ? 0.0 : s.sd;
    }
    groups.push_back({{"method", to_string(g.method)},
                      {"criterion", to_string(g.criterion)},
                      {"count", g.rows.size()},
                      {"mean", mean},
                      {"std", sd}});
  }
  nlohmann::json j = {{"rows", rows.size()}, {"failures", failures}, {"groups", groups}};
  return j.dump(2) + "\n";
}

}  // namespace certprec
