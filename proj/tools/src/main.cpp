// certprec command-line tool. Exit codes: 0 success, 1 unexpected failure,
// 2 input error, 3 infeasible structure, 4 stopped early with an open gap
// (result still written).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "certprec/bench.hpp"
#include "certprec/bigm.hpp"
#include "certprec/covsel.hpp"
#include "certprec/cutplane.hpp"
#include "certprec/error.hpp"
#include "certprec/io.hpp"
#include "certprec/model.hpp"
#include "certprec/rng.hpp"

namespace {

using namespace certprec;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitGap = 4;

struct InputOptions {
  std::string path;
  std::string kind = "samples";
};

struct RegOptions {
  std::string kind = "bigm";
  std::optional<double> value;
  std::optional<double> mult;
  double inflation = 1.1;
};

struct SolverFlags {
  double eps = 1e-4;
  double time_limit_s = 300.0;
  std::size_t node_limit = 0;
  std::string warm = "mb";
  std::string structure;
  bool trace = false;
  bool multi_tree = false;
};

struct OutputOptions {
  std::string out;
  bool omit_timings = false;
};

void add_input(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("--input", in.path, "CSV file with samples (rows) or a p x p covariance")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--input-kind", in.kind, "samples or covariance")
      ->check(CLI::IsMember({"samples", "covariance"}));
}

void add_reg(CLI::App* cmd, RegOptions& reg, bool allow_none) {
  std::vector<std::string> kinds{"bigm", "ridge"};
  if (allow_none) kinds.push_back("none");
  cmd->add_option("--reg", reg.kind, "Regularizer")->check(CLI::IsMember(kinds));
  auto* value = cmd->add_option("--reg-value", reg.value, "M for bigm, gamma for ridge");
  auto* mult = cmd->add_option("--reg-mult", reg.mult, "Multiplier on M0 or gamma0");
  value->excludes(mult);
  cmd->add_option("--bound-inflation", reg.inflation,
                  "Inflation of the default big-M bounds (used without --reg-value/--reg-mult)");
}

void add_solver(CLI::App* cmd, SolverFlags& s) {
  cmd->add_option("--eps", s.eps, "Relative optimality gap")->check(CLI::PositiveNumber);
  cmd->add_option("--time-limit-s", s.time_limit_s, "Wall-clock limit per solve")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--node-limit", s.node_limit, "Branch-and-bound node budget per solve (0: none)");
  cmd->add_option("--warm", s.warm, "mb, none or file:PATH");
  cmd->add_option("--structure", s.structure, "JSON structure file")->check(CLI::ExistingFile);
  cmd->add_flag("--trace", s.trace, "Write progress events as JSON lines to stderr");
  cmd->add_flag("--multi-tree", s.multi_tree, "Re-solve the master problem after every cut");
}

void add_output(CLI::App* cmd, OutputOptions& o) {
  cmd->add_option("--out", o.out, "Output path (default: stdout)");
  cmd->add_flag("--omit-timings", o.omit_timings, "Write timing fields as 0");
}

SymmetricMatrix load_sigma(const InputOptions& in) {
  const DataMatrix table = read_csv_file(in.path);
  if (in.kind == "covariance") return covariance_from_table(table, in.path);
  if (table.rows < 2) fail(ErrorKind::kInvalidInput, in.path + ": need at least two samples");
  return sample_covariance(table);
}

Regularizer make_reg(const RegOptions& r, const SymmetricMatrix& sigma) {
  const std::size_t p = sigma.dim();
  if (r.kind == "none") return BigM::uniform(p, kUnbounded);
  if (r.kind == "ridge") {
    if (r.value) return Ridge{*r.value};
    return scaled_regularizer(RegKind::kRidge, sigma, r.mult.value_or(1.0));
  }
  if (r.value) return BigM::uniform(p, *r.value);
  if (r.mult) return scaled_regularizer(RegKind::kBigM, sigma, *r.mult);
  return default_bigm(sigma, r.inflation);
}

void write_output(const OutputOptions& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    std::cout.flush();
  } else {
    write_text_file(o.out, text);
  }
}

SolveOptions make_solve_options(const SolverFlags& s, const SymmetricMatrix& sigma) {
  SolveOptions o;
  o.eps = s.eps;
  o.time_limit_s = s.time_limit_s;
  o.max_nodes = s.node_limit;
  o.multi_tree = s.multi_tree;
  if (s.warm == "none") {
    o.warm_mode = WarmStartMode::kNone;
  } else if (s.warm.rfind("file:", 0) == 0) {
    const std::string path = s.warm.substr(5);
    o.warm = support_from_table(read_csv_file(path), sigma.dim(), path);
  } else if (s.warm != "mb") {
    fail(ErrorKind::kInvalidInput, "--warm must be mb, none or file:PATH");
  }
  if (s.trace) {
    auto mutex = std::make_shared<std::mutex>();
    o.trace = [mutex](const TraceEvent& ev) {
      const std::lock_guard<std::mutex> lock(*mutex);
      std::cerr << to_json_line(ev) << '\n';
    };
  }
  return o;
}

Constraints load_structure(const SolverFlags& s, std::size_t p) {
  if (s.structure.empty()) return {};
  return read_structure_file(s.structure, p);
}

void strip_timings(SolveResult& r) { r.times = PhaseTimes{}; }

bool open_gap(const SolveResult& r) { return r.status != SolveStatus::kOptimal; }

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  InputOptions in;
  RegOptions reg;
  SolverFlags solver;
  OutputOptions out;
  std::vector<std::size_t> k_list;
  std::optional<std::size_t> k;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
};

int run_estimate(const EstimateArgs& a) {
  const SymmetricMatrix sigma = load_sigma(a.in);
  const Regularizer reg = make_reg(a.reg, sigma);
  const Constraints structure = load_structure(a.solver, sigma.dim());
  const SolveOptions opts = make_solve_options(a.solver, sigma);

  std::vector<SolveResult> results;
  if (a.k) {
    results.push_back(solve(sigma, *a.k, reg, structure, opts));
  } else {
    results = solve_path(sigma, a.k_list, reg, structure, opts);
  }
  bool gap = false;
  json doc = json::array();
  for (SolveResult& r : results) {
    if (a.out.omit_timings) strip_timings(r);
    gap = gap || open_gap(r);
    doc.push_back(json::parse(result_to_json(r, reg)));
  }
  write_output(a.out, (a.k ? doc.front() : doc).dump(2) + "\n");
  return gap ? kExitGap : kExitOk;
}

// ---------------------------------------------------------------- tune

struct TuneArgs {
  InputOptions in;
  std::string val_path;
  std::string reg_kind = "bigm";
  std::vector<double> mults{1.0, 2.0, 4.0, 8.0, 16.0};
  std::string criterion = "holdout";
  SolverFlags solver;
  OutputOptions out;
  std::string grid_out;
  std::vector<std::size_t> k_list;
  std::size_t threads = 1;
  std::uint64_t seed = 1;
};

// Rows shuffled by seed, then split 2:1 into training and validation.
std::pair<DataMatrix, DataMatrix> split_rows(const DataMatrix& x, std::uint64_t seed) {
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, kStreamValidation);
  for (std::size_t i = x.rows; i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
  }
  const std::size_t n_train = (2 * x.rows + 2) / 3;
  DataMatrix train{n_train, x.cols, {}}, val{x.rows - n_train, x.cols, {}};
  for (std::size_t r = 0; r < x.rows; ++r) {
    DataMatrix& dst = r < n_train ? train : val;
    const auto* row = &x.values[order[r] * x.cols];
    dst.values.insert(dst.values.end(), row, row + x.cols);
  }
  return {train, val};
}

int run_tune(const TuneArgs& a) {
  TuningData data;
  const Criterion criterion = a.criterion == "ebic" ? Criterion::kEbic : Criterion::kHoldoutNll;
  if (a.in.kind == "covariance") {
    data.sigma_train = covariance_from_table(read_csv_file(a.in.path), a.in.path);
    if (criterion == Criterion::kEbic) {
      fail(ErrorKind::kInvalidInput, "ebic needs the sample count: pass samples, not a covariance");
    }
    if (a.val_path.empty()) {
      fail(ErrorKind::kInvalidInput, "hold-out tuning on a covariance input needs --val-input");
    }
    data.sigma_val = covariance_from_table(read_csv_file(a.val_path), a.val_path);
  } else {
    DataMatrix train = read_csv_file(a.in.path);
    std::optional<DataMatrix> val;
    if (!a.val_path.empty()) {
      val = read_csv_file(a.val_path);
    } else if (criterion == Criterion::kHoldoutNll) {
      auto [tr, va] = split_rows(train, a.seed);
      train = std::move(tr);
      val = std::move(va);
    }
    if (train.rows < 2 || (val && val->rows < 2)) {
      fail(ErrorKind::kInvalidInput, "need at least two training and two validation samples");
    }
    data.sigma_train = sample_covariance(train);
    data.n_train = train.rows;
    if (val) {
      if (val->cols != train.cols) fail(ErrorKind::kInvalidInput, "validation width differs");
      data.sigma_val = sample_covariance(*val);
    }
  }
  TuningGrid grid;
  grid.k_values = a.k_list;
  std::sort(grid.k_values.begin(), grid.k_values.end(), std::greater<>());
  grid.k_values.erase(std::unique(grid.k_values.begin(), grid.k_values.end()),
                      grid.k_values.end());
  grid.multipliers = a.mults;
  grid.criterion = criterion;
  const RegKind kind = a.reg_kind == "ridge" ? RegKind::kRidge : RegKind::kBigM;
  const Constraints structure = load_structure(a.solver, data.sigma_train.dim());
  const SolveOptions opts = make_solve_options(a.solver, data.sigma_train);

  TunedModel m = tune(data, grid, kind, opts, structure, a.threads);
  if (a.out.omit_timings) {
    strip_timings(m.result);
    for (GridCell& c : m.grid) strip_timings(c.result);
  }
  if (!a.grid_out.empty()) write_text_file(a.grid_out, grid_to_csv(m.grid));
  json doc = json::parse(result_to_json(m.result, m.reg));
  doc["reg_multiplier"] = m.multiplier;
  doc["criterion"] = to_string(criterion);
  doc["criterion_value"] = m.criterion;
  write_output(a.out, doc.dump(2) + "\n");
  return open_gap(m.result) ? kExitGap : kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::size_t p = 20;
  std::size_t n = 0;
  double t = 0.02;
  std::size_t seeds = 3;
  std::uint64_t seed = 1;
  std::vector<std::string> methods{"bigm", "ridge", "mb"};
  std::vector<std::string> criteria{"holdout"};
  std::vector<double> mults{1.0, 2.0, 4.0, 8.0, 16.0};
  std::vector<std::size_t> k_list;
  SolverFlags solver;
  OutputOptions out;
  std::string summary;
  std::size_t threads = 1;
};

int run_bench(const BenchArgs& a) {
  ExperimentConfig cfg;
  cfg.p = a.p;
  cfg.n = a.n;
  cfg.t = a.t;
  cfg.seeds.clear();
  for (std::size_t s = 0; s < a.seeds; ++s) cfg.seeds.push_back(a.seed + s);
  cfg.methods.clear();
  for (const auto& m : a.methods) {
    cfg.methods.push_back(m == "bigm" ? Method::kBigM : m == "ridge" ? Method::kRidge
                                                                     : Method::kNeighborhood);
  }
  cfg.criteria.clear();
  for (const auto& c : a.criteria) {
    cfg.criteria.push_back(c == "ebic" ? Criterion::kEbic : Criterion::kHoldoutNll);
  }
  cfg.multipliers = a.mults;
  cfg.k_values = a.k_list;
  cfg.solve.eps = a.solver.eps;
  cfg.solve.time_limit_s = a.solver.time_limit_s;
  cfg.solve.max_nodes = a.solver.node_limit;
  cfg.solve.multi_tree = a.solver.multi_tree;
  cfg.threads = a.threads;
  const ExperimentReport report = run_experiment(cfg);
  write_output(a.out, report.csv(!a.out.omit_timings));
  if (!a.summary.empty()) write_text_file(a.summary, report.summary_json(!a.out.omit_timings));
  for (const ResultRow& r : report.rows) {
    if (!r.ok) std::cerr << "seed " << r.seed << " " << to_string(r.method) << ": " << r.error << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- covsel

struct CovselArgs {
  InputOptions in;
  RegOptions reg;
  std::string support;
  double gap = 1e-4;
  OutputOptions out;
};

int run_covsel(const CovselArgs& a) {
  const SymmetricMatrix sigma = load_sigma(a.in);
  const Regularizer reg = make_reg(a.reg, sigma);
  const Support z = a.support.empty()
                        ? Support(sigma.dim())
                        : support_from_table(read_csv_file(a.support), sigma.dim(), a.support);
  CovSelOptions opts;
  opts.gap_tol = a.gap;
  const CovSelSolution sol = solve_covsel(sigma, z, reg, opts);
  json doc = {
      {"p", sigma.dim()},
      {"support_size", z.size()},
      {"regularizer", describe(reg)},
      {"status", to_string(sol.status)},
      {"value", sol.primal_value},
      {"dual_value", sol.dual_value},
      {"gap", sol.gap},
      {"iterations", sol.iterations},
  };
  write_output(a.out, doc.dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------- bounds

struct BoundsArgs {
  InputOptions in;
  std::optional<double> level;
  double inflation = 1.1;
  OutputOptions out;
};

int run_bounds(const BoundsArgs& a) {
  const SymmetricMatrix sigma = load_sigma(a.in);
  const BoundOracle oracle(sigma);
  const double u = a.level.value_or(diagonal_level(sigma));
  const auto bounds = oracle.all_pairs(u);
  std::string csv = "i,j,lower,upper,M\n";
  for (const EntryBounds& b : bounds) {
    const double m = std::max(a.inflation * std::max(std::abs(b.lower), std::abs(b.upper)), 1e-8);
    csv += std::to_string(b.pair.i) + "," + std::to_string(b.pair.j) + "," +
           format_double(b.lower) + "," + format_double(b.upper) + "," + format_double(m) + "\n";
  }
  write_output(a.out, csv);
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kInfeasible: return kExitInfeasible;
    case ErrorKind::kInvalidInput:
    case ErrorKind::kNotPositiveDefinite:
    case ErrorKind::kDegenerateInstance: return kExitInput;
    case ErrorKind::kSingularUpdate: return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cardinality-constrained sparse precision matrix estimation"};
  app.require_subcommand(1);

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Solve for one budget k or a decreasing k list");
  add_input(estimate, est.in);
  add_reg(estimate, est.reg, false);
  add_solver(estimate, est.solver);
  add_output(estimate, est.out);
  auto* k_opt = estimate->add_option("--k", est.k, "Support budget (number of pairs)");
  auto* kl_opt = estimate->add_option("--k-list", est.k_list, "Strictly decreasing budgets")
                     ->delimiter(',');
  k_opt->excludes(kl_opt);
  estimate->add_option("--threads", est.threads, "Accepted for symmetry; the solver is serial");
  estimate->add_option("--seed", est.seed, "Unused; estimation is deterministic");

  TuneArgs tn;
  auto* tune_cmd = app.add_subcommand("tune", "Grid search over k and regularization strength");
  add_input(tune_cmd, tn.in);
  tune_cmd->add_option("--val-input", tn.val_path, "Validation CSV (same kind as --input)")
      ->check(CLI::ExistingFile);
  tune_cmd->add_option("--reg", tn.reg_kind)->check(CLI::IsMember({"bigm", "ridge"}));
  tune_cmd->add_option("--reg-mults", tn.mults, "Multipliers on M0 or gamma0")->delimiter(',');
  tune_cmd->add_option("--k-list", tn.k_list, "Candidate budgets")->required()->delimiter(',');
  tune_cmd->add_option("--criterion", tn.criterion)->check(CLI::IsMember({"holdout", "ebic"}));
  tune_cmd->add_option("--grid-out", tn.grid_out, "CSV with one row per grid cell");
  tune_cmd->add_option("--threads", tn.threads, "Multipliers solved in parallel");
  tune_cmd->add_option("--seed", tn.seed, "Seed of the 2:1 train/validation split");
  add_solver(tune_cmd, tn.solver);
  add_output(tune_cmd, tn.out);

  BenchArgs bn;
  auto* bench = app.add_subcommand("bench", "Synthetic recovery experiment");
  bench->add_option("--p", bn.p)->check(CLI::Range(2, 100000));
  bench->add_option("--n", bn.n, "Training samples (0: n = p)");
  bench->add_option("--t", bn.t, "Fraction of true nonzero pairs")->check(CLI::Range(0.0, 1.0));
  bench->add_option("--seeds", bn.seeds, "Number of instances")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bn.seed, "First seed");
  bench->add_option("--methods", bn.methods)
      ->delimiter(',')
      ->check(CLI::IsMember({"bigm", "ridge", "mb"}));
  bench->add_option("--criteria", bn.criteria)
      ->delimiter(',')
      ->check(CLI::IsMember({"holdout", "ebic"}));
  bench->add_option("--reg-mults", bn.mults)->delimiter(',');
  bench->add_option("--k-list", bn.k_list, "Budgets (default: multiples of k_true)")
      ->delimiter(',');
  bench->add_option("--summary", bn.summary, "JSON summary path");
  bench->add_option("--threads", bn.threads, "Seeds solved in parallel");
  add_solver(bench, bn.solver);
  add_output(bench, bn.out);

  CovselArgs cs;
  auto* covsel = app.add_subcommand("covsel", "Covariance selection on a fixed support");
  add_input(covsel, cs.in);
  add_reg(covsel, cs.reg, true);
  covsel->add_option("--support", cs.support, "CSV of 0-based pairs i,j (default: diagonal)")
      ->check(CLI::ExistingFile);
  covsel->add_option("--gap", cs.gap, "Duality gap tolerance")->check(CLI::PositiveNumber);
  add_output(covsel, cs.out);

  BoundsArgs bd;
  auto* bounds = app.add_subcommand("bounds", "Entrywise bounds on optimal precision entries");
  add_input(bounds, bd.in);
  bounds->add_option("--level", bd.level,
                     "Objective level u (default: the diagonal-only fit's objective)");
  bounds->add_option("--inflation", bd.inflation, "Factor applied to the M column");
  add_output(bounds, bd.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*estimate) {
      if (!est.k && est.k_list.empty()) fail(ErrorKind::kInvalidInput, "give --k or --k-list");
      return run_estimate(est);
    }
    if (*tune_cmd) return run_tune(tn);
    if (*bench) return run_bench(bn);
    if (*covsel) return run_covsel(cs);
    if (*bounds) return run_bounds(bd);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
