// Hot-path microbenchmarks: field evaluation, velocity assembly, sparse
// matrix-vector products, and the assignment-based transport distance.
#include <benchmark/benchmark.h>

#include <vector>

#include "spectralflow/activation.hpp"
#include "spectralflow/field.hpp"
#include "spectralflow/functionals.hpp"
#include "spectralflow/geometry.hpp"
#include "spectralflow/potentials.hpp"
#include "spectralflow/reference.hpp"
#include "spectralflow/rng.hpp"

namespace {

using namespace spectralflow;

Ensemble make_ensemble(int d, int m, double tau, std::uint64_t seed) {
  Rng rng(seed);
  Ensemble ens;
  ens.d = d;
  ens.tau = tau;
  const double b_range = std::sqrt(static_cast<double>(d)) + 2.0;
  for (int i = 0; i < m; ++i) {
    Particle p;
    p.a = rng.uniform(0.5, 1.5);
    p.w.resize(d);
    rng.unit_sphere(p.w);
    p.b = rng.uniform(-b_range, b_range);
    ens.particles.push_back(std::move(p));
  }
  return ens;
}

void BM_evaluate_batch(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const int m = static_cast<int>(state.range(1));
  const MollifierTable table = build_mollifier();
  const Ensemble ens = make_ensemble(d, m, 20.0, 7);
  Rng rng(11);
  const QuadratureSet q = mc_quadrature(d, 100, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_batch(ens, table, q.points));
  }
  state.SetItemsProcessed(state.iterations() * m * q.size());
}
BENCHMARK(BM_evaluate_batch)->Args({2, 100})->Args({8, 100})->Args({8, 1000});

void BM_velocity(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const int m = static_cast<int>(state.range(1));
  const MollifierTable table = build_mollifier();
  const Ensemble ens = make_ensemble(d, m, 20.0, 7);
  Rng rng(11);
  const QuadratureSet q = mc_quadrature(d, 100, rng);
  const PotentialSpec W = PotentialSpec::parse("cos1d:100");
  for (auto _ : state) {
    benchmark::DoNotOptimize(velocity(ens, table, q, W));
  }
  state.SetItemsProcessed(state.iterations() * m * q.size());
}
BENCHMARK(BM_velocity)->Args({2, 100})->Args({8, 100})->Args({8, 1000});

void BM_fd_spmv(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FdOperator op = assemble_fd(PotentialSpec::parse("cos1d:100"), n);
  std::vector<double> x(op.nodes(), 1.0), y(op.nodes());
  for (auto _ : state) {
    op.apply(x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * op.nodes());
}
BENCHMARK(BM_fd_spmv)->Arg(64)->Arg(256);

void BM_wasserstein2(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const Ensemble a = make_ensemble(3, m, 20.0, 3);
  const Ensemble b = make_ensemble(3, m, 20.0, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(wasserstein2(a.particles, b.particles));
  }
}
BENCHMARK(BM_wasserstein2)->Arg(16)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
