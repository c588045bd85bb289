#include <benchmark/benchmark.h>

#include "certprec/bench.hpp"
#include "certprec/covsel.hpp"
#include "certprec/cutplane.hpp"
#include "certprec/linalg.hpp"
#include "certprec/rng.hpp"

using namespace certprec;

static void BM_OffDiagonalStep(benchmark::State& state) {
  Rng rng(1);
  const EntryPenalty pen = state.range(0) == 0 ? EntryPenalty::box(0.5) : EntryPenalty::ridge(2.0);
  for (auto _ : state) {
    const double w = 1.0 + rng.uniform();
    benchmark::DoNotOptimize(off_diagonal_step(0.3 * rng.normal(), w, w + 0.5, 0.2 * rng.uniform(),
                                               0.1 * rng.normal(), pen));
  }
}
BENCHMARK(BM_OffDiagonalStep)->Arg(0)->Arg(1);

static void BM_RankTwoUpdate(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  SymmetricMatrix w = SymmetricMatrix::identity(p);
  Rng rng(2);
  std::size_t i = 0;
  for (auto _ : state) {
    const std::size_t a = i % p, b = (i * 7 + 1) % p;
    ++i;
    if (a == b) continue;
    rank_two_update_inverse_in_place(w, a, b, 1e-3 * rng.normal());
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_RankTwoUpdate)->Arg(50)->Arg(200)->Arg(1000);

static void BM_Cholesky(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const CovselInstance inst = gen_covsel_instance(p, 0.0, 3);
  SymmetricMatrix a = inst.sigma;
  for (std::size_t d = 0; d < p; ++d) a.add(d, d, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(log_det(cholesky(a)));
}
BENCHMARK(BM_Cholesky)->Arg(50)->Arg(200);

static void BM_NodeBound(benchmark::State& state) {
  const std::size_t p = 30, total = pair_count(p);
  Rng rng(4);
  MasterState s;
  s.p = p;
  s.k = 10;
  for (int c = 0; c < state.range(0); ++c) {
    Cut cut;
    cut.c0 = 10.0 * rng.uniform();
    cut.weights.resize(total);
    for (double& x : cut.weights) x = rng.uniform();
    s.cuts.push_back(std::move(cut));
  }
  for (auto _ : state) benchmark::DoNotOptimize(node_bound(s, {}, {}));
}
BENCHMARK(BM_NodeBound)->Arg(10)->Arg(100);

static void BM_CovselSolve(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const CovselInstance inst = gen_covsel_instance(p, 0.05, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_covsel(inst.sigma, inst.z, Ridge{1.0}));
  }
}
BENCHMARK(BM_CovselSolve)->Arg(30)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_CuttingPlaneSolve(benchmark::State& state) {
  const SyntheticInstance inst = gen_experiment_instance(15, 30, 0.05, 6);
  SolveOptions o;
  o.max_nodes = 5000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(inst.sigma_train, 5, Ridge{1.0}, {}, o));
  }
}
BENCHMARK(BM_CuttingPlaneSolve)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
