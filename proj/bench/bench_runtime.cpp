#include <benchmark/benchmark.h>

#include <cmath>

#include "brace/ir.hpp"
#include "brace/models.hpp"
#include "brace/optimizer.hpp"
#include "brace/runtime.hpp"

using namespace brace;

namespace {

models::ModelConfig fish(std::size_t n) {
  models::ModelConfig mc;
  mc.model = models::Model::Fish;
  mc.n = n;
  mc.seed = 3;
  const double half = 4.0 * std::sqrt(static_cast<double>(n));
  mc.bounds = {{-half, half}, {-half, half}};
  return mc;
}

runtime::ClusterConfig cluster(const models::ModelConfig &mc, int workers, runtime::Scheduler s, bool index) {
  runtime::ClusterConfig cfg;
  cfg.workers = workers;
  cfg.scheduler = s;
  cfg.world = models::world_of(mc);
  cfg.seed = mc.seed;
  cfg.kernel.use_index = index;
  return cfg;
}

// Serial reference: the whole-tick plan over the full population.
void BM_OracleTick(benchmark::State &state) {
  const auto mc = fish(static_cast<std::size_t>(state.range(0)));
  const auto cs = compile_script(models::bundled_script(mc));
  const auto pop = models::initialize(cs, mc);
  const auto world = models::world_of(mc);
  for (auto _ : state) {
    auto next = ir::run_tick_sequential(cs, pop, VisibilityMode::Restricted, mc.seed, 0, world);
    benchmark::DoNotOptimize(next.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void run_cluster(benchmark::State &state, runtime::Scheduler s, bool index) {
  const auto mc = fish(static_cast<std::size_t>(state.range(0)));
  const auto cs = compile_script(models::bundled_script(mc));
  const int workers = static_cast<int>(state.range(1));
  runtime::Cluster c(cs, cluster(mc, workers, s, index), models::initialize(cs, mc));
  for (auto _ : state) c.tick();
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ClusterSequential(benchmark::State &state) { run_cluster(state, runtime::Scheduler::Sequential, true); }
void BM_ClusterParallel(benchmark::State &state) { run_cluster(state, runtime::Scheduler::Parallel, true); }
void BM_ClusterScan(benchmark::State &state) { run_cluster(state, runtime::Scheduler::Parallel, false); }

void BM_Predator(benchmark::State &state) {
  models::ModelConfig mc;
  mc.model = models::Model::PredatorNonlocal;
  mc.n = 4000;
  mc.seed = 1;
  const auto cs = compile_script(models::bundled_script(mc));
  opt::PlanOptions po;
  po.invert = state.range(0) != 0;
  const auto planned = opt::classify_and_plan(cs, po);
  auto cfg = cluster(mc, 4, runtime::Scheduler::Parallel, state.range(1) != 0);
  cfg.kernel.probes = planned.probes;
  const auto pop = models::initialize(cs, mc);
  for (auto _ : state) {
    state.PauseTiming();
    runtime::Cluster c(planned.script, cfg, pop);
    state.ResumeTiming();
    for (int t = 0; t < 5; ++t) c.tick();
  }
  state.SetItemsProcessed(state.iterations() * 5 * static_cast<std::int64_t>(mc.n));
}

}  // namespace

BENCHMARK(BM_OracleTick)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClusterSequential)->Args({1000, 1})->Args({1000, 4})->Args({4000, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClusterParallel)->Args({1000, 1})->Args({1000, 4})->Args({4000, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClusterScan)->Args({1000, 4})->Args({4000, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Predator)->ArgNames({"invert", "index"})->ArgsProduct({{0, 1}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
