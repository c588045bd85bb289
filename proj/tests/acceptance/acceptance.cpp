// Acceptance checks. Usage: certprec_acceptance [criterion ...]
// Prints one "criterion N: PASS|FAIL <details>" line per criterion and exits
// non-zero if any of the requested criteria fail.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "certprec/bench.hpp"
#include "certprec/bigm.hpp"
#include "certprec/covsel.hpp"
#include "certprec/cutplane.hpp"
#include "certprec/io.hpp"
#include "certprec/linalg.hpp"
#include "certprec/model.hpp"
#include "oracles.hpp"
#include "step_oracles.hpp"

using namespace certprec;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

SolveOptions tight_options() {
  SolveOptions o;
  o.eps = 1e-8;
  o.covsel.gap_tol = 1e-10;
  o.covsel.improve_tol = 1e-15;
  o.time_limit_s = 600.0;
  return o;
}

// Max |entry| over all entries, diagonal included.
double max_abs(const SymmetricMatrix& a) { return norm_max(a); }

// ---------------------------------------------------------------------------

Outcome criterion1() {
  double worst = 0.0;
  std::size_t solves = 0, bad = 0;
  std::string first_bad;
  const auto t0 = Clock::now();
  for (std::size_t p = 4; p <= 6; ++p) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 2 * p, seed);
      const std::vector<std::pair<std::string, Regularizer>> regs{
          {"ridge", scaled_regularizer(RegKind::kRidge, sigma, 1.0)},
          {"bigm", default_bigm(sigma, 1.1)}};
      for (const auto& [name, reg] : regs) {
        const auto table = oracle::enumerate_all(sigma, reg, 1e-8);
        CuttingPlaneSolver solver(sigma, reg, {}, tight_options());
        for (std::size_t k = pair_count(p) + 1; k-- > 0;) {
          const SolveResult r = solver.solve(k);
          const double ref = oracle::best_value(table, k);
          const double d = rel_diff(r.upper, ref);
          worst = std::max(worst, d);
          ++solves;
          if (d > 1e-6 || r.status != SolveStatus::kOptimal) {
            ++bad;
            if (first_bad.empty()) {
              first_bad = fmt(" first mismatch p=%zu seed=%llu %s k=%zu: %.12g vs %.12g (%s)", p,
                              static_cast<unsigned long long>(seed), name.c_str(), k, r.upper,
                              ref, to_string(r.status));
            }
          }
        }
      }
    }
  }
  return {bad == 0, fmt("%zu solves, %zu mismatches, max rel diff %.2e, %.1f s", solves, bad,
                        worst, seconds_since(t0)) +
                        first_bad};
}

// ---------------------------------------------------------------------------

Outcome criterion2() {
  Outcome out;
  // Closed-form steps against golden section.
  Rng rng(2024);
  double worst_step = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    double t = 0.0, ref = 0.0;
    if (trial % 2 == 0) {
      const oracle::StepCase c = oracle::random_step_case(rng, (trial / 2) % 3);
      t = off_diagonal_step(c.sigma, c.wii, c.wjj, c.wij, c.theta, c.pen).t;
      ref = oracle::oracle_offdiag(c);
    } else {
      const double w = 0.2 + 2.0 * rng.uniform();
      const double theta = 1.0 / w + 2.0 * rng.uniform();
      const double sigma = 0.2 + 2.0 * rng.uniform();
      EntryPenalty pen = EntryPenalty::box(oracle::kInf);
      if ((trial / 2) % 3 == 1) pen = EntryPenalty::ridge(0.05 + 3.0 * rng.uniform());
      if ((trial / 2) % 3 == 2) pen = EntryPenalty::box(theta + 0.5 * rng.uniform());
      t = diagonal_step(sigma, w, theta, pen).t;
      ref = oracle::oracle_diag(sigma, w, theta, pen);
    }
    worst_step = std::max(worst_step, std::abs(t - ref));
  }
  if (worst_step > 1e-6) out.pass = false;

  // Duality gap and the Ridge KKT identity on random instances.
  double worst_gap = 0.0, worst_kkt = 0.0;
  std::size_t unconverged = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng pick(seed, 99);
    const std::size_t p = 10 + pick.below(41);
    const double t = 0.005 + 0.045 * pick.uniform();
    const CovselInstance inst = gen_covsel_instance(p, t, seed);
    const Regularizer ridge = scaled_regularizer(RegKind::kRidge, inst.sigma, 1.0);
    const Regularizer reg = seed % 2 == 0 ? ridge : Regularizer{BigM::uniform(p, 0.5)};
    const CovSelSolution sol = solve_covsel(inst.sigma, inst.z, reg);
    worst_gap = std::max(worst_gap, sol.gap);
    if (sol.status != CovSelStatus::kConverged) ++unconverged;
    if (seed % 2 == 0) {
      const double gamma = std::get<Ridge>(ridge).gamma;
      const double lhs = inner(inst.sigma, sol.theta) +
                         norm_l2(sol.theta) * norm_l2(sol.theta) / gamma;
      worst_kkt = std::max(worst_kkt, std::abs(lhs - static_cast<double>(p)));
    }
  }
  if (worst_gap > 1e-4 || unconverged > 0 || worst_kkt > 1e-3) out.pass = false;
  out.detail = fmt(
      "1000 steps max |dt| %.2e; 50 covsel instances max gap %.2e, %zu unconverged; ridge KKT "
      "max residual %.2e",
      worst_step, worst_gap, unconverged, worst_kkt);
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion3() {
  const std::size_t p = 5;
  std::size_t cuts = 0, violations = 0, instances = 0;
  double worst = -oracle::kInf;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 2 * p, seed);
    for (const Regularizer& reg :
         {scaled_regularizer(RegKind::kRidge, sigma, 1.0), Regularizer{default_bigm(sigma)}}) {
      const auto table = oracle::enumerate_all(sigma, reg, 1e-10);
      SolveOptions o = tight_options();
      CuttingPlaneSolver solver(sigma, reg, {}, o);
      solver.solve(2);
      ++instances;
      for (const Cut& cut : solver.cuts()) {
        ++cuts;
        for (std::uint32_t mask = 0; mask < table.value.size(); ++mask) {
          const double excess = cut.evaluate(table.support(mask)) - table.value[mask];
          worst = std::max(worst, excess);
          if (excess > 1e-6) ++violations;
        }
      }
    }
  }
  return {violations == 0,
          fmt("%zu solves, %zu cuts checked on all 1024 supports, %zu violations, max "
              "cut - h %.2e",
              instances, cuts, violations, worst)};
}

// ---------------------------------------------------------------------------

Outcome criterion4() {
  std::size_t checked3 = 0, checked4 = 0, bad = 0;
  double worst3 = -oracle::kInf, worst4 = -oracle::kInf;
  auto check3 = [&](const SymmetricMatrix& sigma, const SymmetricMatrix& theta) {
    const double bound = static_cast<double>(sigma.dim()) / norm_l1(sigma);
    const double slack = bound - max_abs(theta);
    worst3 = std::max(worst3, slack);
    ++checked3;
    if (slack > 1e-6) ++bad;
  };
  auto check4 = [&](const SymmetricMatrix& sigma, const SymmetricMatrix& theta, double gamma) {
    const double p = static_cast<double>(sigma.dim());
    const double s = norm_l2(sigma);
    const double nt = norm_l2(theta);
    const double lower = 0.5 * gamma * s * (std::sqrt(1.0 + 4.0 * p / (gamma * s * s)) - 1.0);
    const double upper = std::sqrt(p * gamma);
    const double slack = std::max(lower - nt, nt - upper);
    worst4 = std::max(worst4, slack);
    ++checked4;
    if (slack > 1e-6) ++bad;
  };

  for (std::size_t p : {5, 8, 12}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 2 * p, seed);
      const std::size_t kmax = pair_count(p);
      const std::vector<std::size_t> ks{kmax, kmax / 2, p / 2, 1, 0};
      SolveOptions o = tight_options();
      o.max_nodes = 20000;
      const BigM large = BigM::uniform(p, 1e3);
      CuttingPlaneSolver bigm(sigma, large, {}, o);
      for (std::size_t k : ks) check3(sigma, bigm.solve(k).theta);
      for (double mult : {0.25, 1.0, 4.0}) {
        const Regularizer ridge = scaled_regularizer(RegKind::kRidge, sigma, mult);
        const double gamma = std::get<Ridge>(ridge).gamma;
        CuttingPlaneSolver rs(sigma, ridge, {}, o);
        for (std::size_t k : ks) check4(sigma, rs.solve(k).theta, gamma);
      }
    }
  }
  // Larger covsel solutions on random supports.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const CovselInstance inst = gen_covsel_instance(30, 0.05, seed);
    CovSelOptions co;
    co.gap_tol = 1e-10;
    check3(inst.sigma, solve_covsel(inst.sigma, inst.z, BigM::uniform(30, 1e3), co).theta);
    const Regularizer ridge = scaled_regularizer(RegKind::kRidge, inst.sigma, 1.0);
    check4(inst.sigma, solve_covsel(inst.sigma, inst.z, ridge, co).theta,
           std::get<Ridge>(ridge).gamma);
  }
  return {bad == 0, fmt("norm lower bound on %zu solutions (max violation %.2e); ridge sandwich "
                        "on %zu solutions (max violation %.2e)",
                        checked3, worst3, checked4, worst4)};
}

// ---------------------------------------------------------------------------

Outcome criterion5() {
  const std::size_t p = 5;
  std::size_t optima = 0, outside = 0;
  double worst = -oracle::kInf;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SymmetricMatrix sigma = oracle::random_sample_covariance(p, 2 * p, seed);
    const auto table = oracle::enumerate_all(sigma, BigM::uniform(p, kUnbounded), 1e-10, true);
    const double u = diagonal_level(sigma);
    const auto bounds = BoundOracle(sigma).all_pairs(u);
    for (std::size_t k = 0; k <= pair_count(p); ++k) {
      std::uint32_t arg = 0;
      oracle::best_value(table, k, {}, &arg);
      const SymmetricMatrix& theta = table.theta[arg];
      ++optima;
      for (const EntryBounds& b : bounds) {
        const double v = theta(b.pair.i, b.pair.j);
        const double excess = std::max(b.lower - v, v - b.upper);
        worst = std::max(worst, excess);
        if (excess > 1e-6) ++outside;
      }
    }
  }

  Rng rng(55);
  double worst_g = 0.0;
  std::size_t evals = 0;
  while (evals < 100) {
    const std::size_t q = 3 + rng.below(6);
    const SymmetricMatrix sigma = oracle::random_spd(q, rng);
    const BoundOracle bo(sigma);
    const double u = static_cast<double>(q) + bo.log_det_sigma() + 0.1 + 3.0 * rng.uniform();
    const std::size_t i = rng.below(q);
    std::size_t j = rng.below(q - 1);
    if (j >= i) ++j;
    const ScalarDual g = bo.lower_dual(u, std::min(i, j), std::max(i, j));
    const double lambda = g.domain_start() + 0.05 + 10.0 * rng.uniform();
    const double dense = dual_objective_dense(sigma, u, std::min(i, j), std::max(i, j), lambda);
    worst_g = std::max(worst_g, std::abs(g.value(lambda) - dense) / std::max(1.0, std::abs(dense)));
    ++evals;
  }
  return {outside == 0 && worst_g <= 1e-9,
          fmt("%zu brute-force optima, %zu entries outside bounds (max excess %.2e); g closed "
              "form vs dense on %zu cases, max rel diff %.2e",
              optima, outside, worst, evals, worst_g)};
}

// ---------------------------------------------------------------------------

Outcome criterion6() {
  const std::size_t p = 100;
  Rng rng(6);
  const SymmetricMatrix theta0 = oracle::random_spd(p, rng, 1.0);
  constexpr std::size_t kRefresh = 500;
  InverseTracker tracker(theta0, kRefresh);
  std::size_t applied = 0;
  double drift = 0.0;
  while (applied < 10000) {
    const std::size_t i = rng.below(p);
    const std::size_t j = rng.below(p);
    const std::size_t a = std::min(i, j), b = std::max(i, j);
    // Random steps pulled back toward the start keep Theta well conditioned.
    const double pull = (tracker.theta()(a, b) - theta0(a, b)) * (a == b ? 0.5 : 1.0);
    const double t = 0.05 * (2.0 * rng.uniform() - 1.0) - 0.2 * pull;
    if (!(det_ratio(tracker.inverse(), a, b, t) > 0.5)) continue;
    tracker.update(a, b, t);
    ++applied;
    // Sample the drift where it peaks, one update before each refresh.
    if (applied % kRefresh == kRefresh - 1) {
      drift = std::max(drift, norm_max(tracker.inverse() - inverse_spd(tracker.theta())));
    }
  }
  drift = std::max(drift, norm_max(tracker.inverse() - inverse_spd(tracker.theta())));
  return {drift <= 1e-6, fmt("%zu rank-two updates on p=%zu, %zu refreshes, max |W - inv| before refresh %.2e",
                             applied, p, tracker.refreshes(), drift)};
}

// ---------------------------------------------------------------------------

double support_fdr(const Support& est, const Support& truth) {
  if (est.empty()) return 0.0;
  std::size_t false_pos = 0;
  for (const Pair& e : est.pairs()) {
    if (!truth.contains(e.i, e.j)) ++false_pos;
  }
  return static_cast<double>(false_pos) / static_cast<double>(est.size());
}

Outcome criterion7() {
  const auto t0 = Clock::now();
  ExperimentConfig cfg;
  cfg.p = 50;
  cfg.n = 0;
  cfg.t = 0.02;
  cfg.methods = {Method::kBigM};
  cfg.criteria = {Criterion::kHoldoutNll};
  cfg.solve.time_limit_s = 2.0;
  double sum_a = 0.0, sum_fdr = 0.0;
  std::size_t wins = 0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    cfg.seeds = {seed};
    const ExperimentReport rep = run_experiment(cfg);
    const ResultRow& row = rep.rows.front();
    const SyntheticInstance inst = gen_experiment_instance(cfg.p, cfg.p, cfg.t, seed);
    const std::size_t k = row.support.size();
    const double mb_fdr = support_fdr(warm_start(inst.sigma_train, k), inst.support_true);
    sum_a += row.metrics.accuracy;
    sum_fdr += row.metrics.fdr;
    if (row.metrics.fdr < mb_fdr) ++wins;
    per_seed << fmt(" [seed %llu k=%zu A=%.3f FDR=%.3f mbFDR=%.3f]",
                    static_cast<unsigned long long>(seed), k, row.metrics.accuracy,
                    row.metrics.fdr, mb_fdr);
  }
  const double mean_a = sum_a / 10.0, mean_fdr = sum_fdr / 10.0;
  const double elapsed = seconds_since(t0);
  const bool pass = mean_a >= 0.85 && mean_fdr <= 0.15 && wins >= 8 && elapsed <= 1200.0;
  return {pass, fmt("mean A %.3f (>= 0.85), mean FDR %.3f (<= 0.15), exact FDR below MB on "
                    "%zu/10 seeds (>= 8), %.0f s (<= 1200);",
                    mean_a, mean_fdr, wins, elapsed) +
                    per_seed.str()};
}

// ---------------------------------------------------------------------------

Outcome criterion8() {
  Outcome out;
  // Covariance selection at scale.
  auto t0 = Clock::now();
  const CovselInstance big = gen_covsel_instance(1000, 0.01, 1);
  const Regularizer ridge = scaled_regularizer(RegKind::kRidge, big.sigma, 1.0);
  const CovSelSolution sol = solve_covsel(big.sigma, big.z, ridge);
  const double covsel_s = seconds_since(t0);
  if (sol.status != CovSelStatus::kConverged || sol.gap > 1e-4 || covsel_s > 600.0) {
    out.pass = false;
  }
  out.detail = fmt("covsel p=1000 |Z|=%zu: %s gap %.2e in %.1f s (<= 600);", big.z.size(),
                   to_string(sol.status), sol.gap, covsel_s);

  // Certified optimality on small synthetic instances.
  const double t = 5.5 / static_cast<double>(pair_count(30));
  double worst_s = 0.0;
  std::size_t certified = 0;
  const std::size_t instances = 10;
  for (std::uint64_t seed = 1; seed <= instances; ++seed) {
    const SyntheticInstance inst = gen_experiment_instance(30, 200, t, seed);
    SolveOptions o;
    o.eps = 1e-4;
    o.time_limit_s = 300.0;
    t0 = Clock::now();
    const SolveResult r = solve(inst.sigma_train, inst.support_true.size(),
                                BigM::uniform(30, 0.5), {}, o);
    const double s = seconds_since(t0);
    worst_s = std::max(worst_s, s);
    if (r.status == SolveStatus::kOptimal && s <= 300.0) ++certified;
    out.detail += fmt(" [seed %llu k=%zu %s gap %.1e %.1f s]",
                      static_cast<unsigned long long>(seed), inst.support_true.size(),
                      to_string(r.status), r.relative_gap, s);
  }
  if (certified != instances) out.pass = false;
  out.detail += fmt(" certified %zu/%zu at p=30 (max %.1f s, <= 300 each)", certified, instances,
                    worst_s);
  return out;
}

// ---------------------------------------------------------------------------

#ifdef CERTPREC_CLI_PATH

int run_cli(const std::string& args, const std::filesystem::path& stdout_file) {
  const std::string cmd = std::string("\"") + CERTPREC_CLI_PATH + "\" " + args + " > \"" +
                          stdout_file.string() + "\" 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion9() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / fmt("certprec_accept_%d", ::getpid());
  fs::create_directories(dir);
  // Samples drawn from a fixed instance.
  const SyntheticInstance inst = gen_experiment_instance(8, 40, 0.15, 3);
  Rng rng(3, kStreamTrain);
  const DataMatrix x = sample_gaussian(inverse_spd(inst.theta_true), 40, rng);
  {
    std::ofstream f(dir / "samples.csv");
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t c = 0; c < x.cols; ++c) {
        f << (c ? "," : "") << format_double(x(r, c));
      }
      f << "\n";
    }
  }
  {
    std::ofstream f(dir / "cov.csv");
    const SymmetricMatrix s = sample_covariance(x);
    for (std::size_t i = 0; i < s.dim(); ++i) {
      for (std::size_t j = 0; j < s.dim(); ++j) f << (j ? "," : "") << format_double(s(i, j));
      f << "\n";
    }
  }
  const std::string in = "--input \"" + (dir / "samples.csv").string() + "\"";
  const std::string cov = "--input \"" + (dir / "cov.csv").string() + "\" --input-kind covariance";
  const std::vector<std::pair<std::string, std::string>> commands{
      {"estimate bigm",
       "estimate " + in + " --k 6 --node-limit 2000 --omit-timings --seed 7 --threads 1"},
      {"estimate ridge path", "estimate " + in +
                                  " --reg ridge --k-list 10,6,3 --node-limit 2000 --omit-timings "
                                  "--seed 7 --threads 1"},
      {"tune", "tune " + in + " --k-list 8,5,2 --reg-mults 1,4 --node-limit 2000 --omit-timings "
                              "--seed 7 --threads 1 --grid-out \"" +
                   (dir / "grid_%RUN%.csv").string() + "\""},
      {"bench", "bench --p 12 --t 0.1 --seeds 2 --seed 7 --node-limit 500 --omit-timings "
                "--threads 1 --summary \"" + (dir / "summary_%RUN%.json").string() + "\""},
      {"covsel", "covsel " + cov},
      {"bounds", "bounds " + cov},
  };
  std::size_t identical = 0;
  std::string failures;
  for (const auto& [name, args] : commands) {
    std::string outputs[2];
    int codes[2];
    for (int run = 0; run < 2; ++run) {
      std::string a = args;
      const std::string tag = std::to_string(run);
      for (std::size_t pos; (pos = a.find("%RUN%")) != std::string::npos;) a.replace(pos, 5, tag);
      const fs::path out = dir / fmt("out_%d.txt", run);
      codes[run] = run_cli(a, out);
      outputs[run] = slurp(out);
      if (name == "tune") outputs[run] += slurp(dir / ("grid_" + tag + ".csv"));
      if (name == "bench") outputs[run] += slurp(dir / ("summary_" + tag + ".json"));
    }
    if (codes[0] == codes[1] && (codes[0] == 0 || codes[0] == 4) && outputs[0] == outputs[1] &&
        !outputs[0].empty()) {
      ++identical;
    } else {
      failures += fmt(" [%s: exit %d/%d, %s]", name.c_str(), codes[0], codes[1],
                      outputs[0] == outputs[1] ? "same bytes" : "bytes differ");
    }
  }
  fs::remove_all(dir);
  return {identical == commands.size(),
          fmt("%zu/%zu commands byte-identical across two runs", identical, commands.size()) +
              failures};
}

#else

Outcome criterion9() { return {false, "CLI not built"}; }

#endif

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Outcome()>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}};
  std::vector<int> selected;
  for (int a = 1; a < argc; ++a) selected.push_back(std::atoi(argv[a]));
  if (selected.empty()) {
    for (const auto& [n, fn] : criteria) selected.push_back(n);
  }
  int failed = 0;
  for (int n : selected) {
    const auto it = criteria.find(n);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << n << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.detail
              << std::endl;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
