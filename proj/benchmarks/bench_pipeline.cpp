#include "evergreen/pipeline.hpp"
#include "evergreen/synthgen.hpp"

#include <benchmark/benchmark.h>

using namespace evergreen;

static void BM_Pipeline(benchmark::State& state) {
    GeneratorSpec spec;
    spec.n = static_cast<std::size_t>(state.range(0));
    const Corpus corpus = simulate_corpus(spec).corpus;
    PipelineConfig config;
    RunOptions options;
    options.baseline = state.range(1) != 0;
    for (auto _ : state) benchmark::DoNotOptimize(run_pipeline(config, corpus, options));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(spec.n));
}
BENCHMARK(BM_Pipeline)
    ->ArgNames({"n", "wsb"})
    ->Args({500, 0})
    ->Args({2000, 0})
    ->Args({2000, 1})
    ->Unit(benchmark::kSecond)
    ->Iterations(1);

static void BM_Simulate(benchmark::State& state) {
    GeneratorSpec spec;
    spec.n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(simulate_corpus(spec));
}
BENCHMARK(BM_Simulate)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
