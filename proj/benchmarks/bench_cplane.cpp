#include <benchmark/benchmark.h>

#include "cplane/estimator.hpp"
#include "cplane/profile.hpp"
#include "cplane/simulation.hpp"
#include "cplane/subgroup_test.hpp"

using namespace cplane;

namespace {

SimulatedData make_data(int n, int m, DgpMode mode = DgpMode::kEstimation) {
  DGPSpec spec;
  spec.n = n;
  spec.M = m;
  spec.mode = mode;
  spec.c = mode == DgpMode::kTesting ? 0.0 : 1.0;
  spec.seed = 7;
  return generate(spec);
}

}  // namespace

// One profiled solve at a fixed gamma: the inner step of every search evaluation.
static void BM_ProfileSolve(benchmark::State& state) {
  const SimulatedData sim = make_data(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const FitConfig config;
  const ProfileSolver solver(sim.dataset, make_kernel(sim.dataset, config), config.lambda,
                             config.bandwidth_for(sim.dataset.n()));
  const Eigen::VectorXd gamma = Eigen::Vector2d(-0.9, 1.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solver.profile_loss(gamma));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ProfileSolve)->Args({200, 30})->Args({400, 30})->Args({400, 60})->Unit(benchmark::kMicrosecond);

// Full alternating fit: screen, Nelder-Mead restarts and final solve.
static void BM_Fit(benchmark::State& state) {
  const SimulatedData sim = make_data(static_cast<int>(state.range(0)), 30);
  const FitConfig config;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit(sim.dataset, config).gamma);
  }
}
BENCHMARK(BM_Fit)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

// Observed supremum statistic over a family of Q candidate planes.
static void BM_TestStatistic(benchmark::State& state) {
  const SimulatedData sim = make_data(200, 30, DgpMode::kTesting);
  const FitConfig config;
  const auto kernel = make_kernel(sim.dataset, config);
  const CoefficientFunctions beta = null_beta(sim.dataset, config.lambda, kernel);
  const GammaFamily family =
      build_gamma_family(sim.dataset, static_cast<int>(state.range(0)), FamilyMode::kPercentileLine, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(test_statistic(sim.dataset, beta, family, *kernel).t_obs);
  }
}
BENCHMARK(BM_TestStatistic)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

// Multiplier bootstrap p-value with B draws over Q = 200 candidates.
static void BM_Bootstrap(benchmark::State& state) {
  const SimulatedData sim = make_data(200, 30, DgpMode::kTesting);
  const FitConfig config;
  const auto kernel = make_kernel(sim.dataset, config);
  const CoefficientFunctions beta = null_beta(sim.dataset, config.lambda, kernel);
  const GammaFamily family = build_gamma_family(sim.dataset, 200, FamilyMode::kPercentileLine, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        bootstrap_pvalue(sim.dataset, beta, family, *kernel, static_cast<int>(state.range(0)), 11).p_value);
  }
}
BENCHMARK(BM_Bootstrap)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
