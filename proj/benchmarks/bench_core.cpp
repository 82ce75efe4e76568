#include <benchmark/benchmark.h>

#include "ptycho/forward.hpp"
#include "ptycho/objective.hpp"
#include "ptycho/recon.hpp"
#include "ptycho/rng.hpp"

using namespace ptycho;

namespace {

BlockVector random_stack(int blocks, int side, std::uint64_t seed) {
  Rng rng(seed);
  BlockVector out(blocks, side);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  return out;
}

WavelengthSpec three_colors() { return {{1.0, 1.25, 1.5}}; }

}  // namespace

static void BM_ScaledDftDense(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ScaledDftPlan plan(n, three_colors(), ScaledDftPlan::Path::dense);
  const BlockVector field = random_stack(1, n, 1);
  std::vector<cplx> out(field.grid_size());
  for (auto _ : state) {
    plan.forward(2, field.data(), out.data());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_ScaledDftDense)->Arg(32)->Arg(64)->Arg(100)->Arg(128)->Complexity();

static void BM_ScaledDftConvolution(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ScaledDftPlan plan(n, three_colors(), ScaledDftPlan::Path::convolution);
  const BlockVector field = random_stack(1, n, 1);
  std::vector<cplx> out(field.grid_size());
  for (auto _ : state) {
    plan.forward(2, field.data(), out.data());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_ScaledDftConvolution)->Arg(32)->Arg(64)->Arg(100)->Arg(128)->Complexity();

static void BM_Simulate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const WavelengthSpec spec = three_colors();
  const ScaledDftPlan plan(n, spec);
  const BlockVector object = random_stack(3, n, 2);
  const BlockVector probe = gaussian_probe(n, n * 3 / 8, std::vector<double>{0.2, 0.5, 0.3});
  const ShiftList shifts = fermat_shifts(n, n * 3 / 8, n / 16.0);
  for (auto _ : state) {
    auto stack = simulate(object, probe, shifts, spec, plan);
    benchmark::DoNotOptimize(stack.values.data());
  }
}
BENCHMARK(BM_Simulate)->Arg(32)->Arg(64)->Arg(100);

static void BM_ObjectGradient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const WavelengthSpec spec = three_colors();
  const ScaledDftPlan plan(n, spec);
  const BlockVector object = random_stack(3, n, 3);
  const BlockVector probe = gaussian_probe(n, n * 3 / 8, std::vector<double>{0.2, 0.5, 0.3});
  const ShiftList shifts = fermat_shifts(n, n * 3 / 8, n / 16.0);
  const PtychoOperatorFamily family(PtychoOperatorFamily::Form::object, probe, shifts, spec, &plan);
  const std::vector<double> y = family.quad_values(object);
  const RegularizedObjective objective(family, y, {1e-8, 1e-2, 0.1, {}}, 3);
  for (auto _ : state) {
    BlockVector g = objective.wgrad(object);
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_ObjectGradient)->Arg(32)->Arg(64);

static void BM_StepBound(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const WavelengthSpec spec = three_colors();
  const ScaledDftPlan plan(n, spec);
  const BlockVector probe = gaussian_probe(n, n * 3 / 8, std::vector<double>{0.2, 0.5, 0.3});
  const ShiftList shifts = fermat_shifts(n, n * 3 / 8, n / 16.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(object_step_bound(probe, shifts, spec, plan, 1e-2));
  }
}
BENCHMARK(BM_StepBound)->Arg(32)->Arg(64)->Arg(100);

BENCHMARK_MAIN();
