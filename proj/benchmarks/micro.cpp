#include "sketchdfo/geometry.hpp"
#include "sketchdfo/poly_model.hpp"
#include "sketchdfo/sketch.hpp"
#include "sketchdfo/solver.hpp"
#include "sketchdfo/trust_region.hpp"

#include <benchmark/benchmark.h>

using namespace sketchdfo;

namespace {

Matrix gaussian(Index r, Index c, CounterRng& rng) {
  Matrix a(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) a(i, j) = rng.normal();
  return a;
}

void BM_QrInsertColumn(benchmark::State& state) {
  const Index m = state.range(0);
  CounterRng rng(1);
  const Matrix a = gaussian(m, m / 2, rng);
  for (auto _ : state) {
    linalg::UpdatableQR qr(m);
    for (Index j = 0; j < a.cols(); ++j) qr.insert_column(a.col(j));
    benchmark::DoNotOptimize(qr.r().data());
  }
}
BENCHMARK(BM_QrInsertColumn)->Arg(32)->Arg(128);

void BM_BasisSketchSolve(benchmark::State& state) {
  const Index n = state.range(0);
  const Index p = n / 4;
  CounterRng rng(2);
  const Matrix q = gaussian(n, n, rng).householderQr().householderQ();
  const Matrix s = q.leftCols(p).transpose();
  const Matrix sp = q.rightCols(n - p).transpose();
  const Matrix pts = gaussian(2 * n + 1, n, rng);
  const Matrix rhs = gaussian(2 * n + 1, n, rng);
  for (auto _ : state) {
    const BasisSketchSystem sys(s, sp, pts);
    benchmark::DoNotOptimize(sys.solve(rhs).alpha.data());
  }
}
BENCHMARK(BM_BasisSketchSolve)->Arg(20)->Arg(100);

void BM_OptimalProbabilities(benchmark::State& state) {
  const Index n = state.range(0);
  CounterRng rng(3);
  const Vector v = gaussian(n, 1, rng).col(0).cwiseAbs();
  for (auto _ : state) benchmark::DoNotOptimize(probabilities_from_magnitudes(v, n / 3).pi.data());
}
BENCHMARK(BM_OptimalProbabilities)->Arg(100)->Arg(1000);

void BM_SolveTrsp(benchmark::State& state) {
  const Index n = state.range(0);
  CounterRng rng(4);
  const Matrix a = gaussian(n, n, rng);
  const Matrix h = a + a.transpose();
  const Vector g = gaussian(n, 1, rng).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_trsp(g, h, 1.0).d.data());
}
BENCHMARK(BM_SolveTrsp)->Arg(20)->Arg(100);

void BM_SolverRosenbrock(benchmark::State& state) {
  const ProblemSpec p = get_problem("extended-rosenbrock", state.range(0));
  SolverConfig cfg = SolverConfig::defaults(p.n, SolverConfig::default_delta0(p.x0), 20 * (p.n + 1));
  if (state.range(1) == 1) cfg.mode = SolverMode::DeterministicBaseline;
  for (auto _ : state) benchmark::DoNotOptimize(run_solver(p, p.x0, cfg).f_final);
}
BENCHMARK(BM_SolverRosenbrock)->Args({20, 0})->Args({20, 1})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
