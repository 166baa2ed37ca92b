// Serial reference paths against their OpenMP counterparts.

#include "bsbl/experiments.hpp"
#include "bsbl/model.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace bsbl;
namespace ex = bsbl::experiments;

void posterior(benchmark::State& state, bool parallel) {
  const Index m = 128;
  const Index n = 512;
  const Index d = state.range(0);
  const ex::Synthetic data = ex::synthesize({m, n, BlockPartition::uniform(n, d), 4,
                                             ex::IntraCorrelation::fixed(0.9), true, 20.0, 1});
  const BlockLayout layout = BlockLayout::contiguous(data.partition);
  const Hyperparams hp = Hyperparams::initial(data.partition, 1.0, 0.01);
  PosteriorOptions opts;
  opts.parallel = parallel;
  opts.all_grams = true;
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_posterior_detail(data.problem, layout, hp, opts));
  }
}

void BM_PosteriorSerial(benchmark::State& s) { posterior(s, false); }
void BM_PosteriorParallel(benchmark::State& s) { posterior(s, true); }
BENCHMARK(BM_PosteriorSerial)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PosteriorParallel)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void harness(benchmark::State& state, ex::Execution exec) {
  ex::CorrelationSweepConfig c;
  c.M = 40;
  c.N = 120;
  c.k_active = 6;
  c.correlations = {0.0, 0.9};
  c.algorithms = {{ex::AlgorithmId::BsblEm}, {ex::AlgorithmId::BsblBo}};
  c.trials = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ex::run_correlation_sweep(c, exec));
}

void BM_TrialsSerial(benchmark::State& s) { harness(s, ex::Execution::Serial); }
void BM_TrialsParallel(benchmark::State& s) { harness(s, ex::Execution::Parallel); }
BENCHMARK(BM_TrialsSerial)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrialsParallel)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
