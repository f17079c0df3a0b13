#include "evergreen/fpca.hpp"
#include "evergreen/poisson_fit.hpp"
#include "evergreen/synthgen.hpp"
#include "evergreen/wsb.hpp"

#include <benchmark/benchmark.h>

using namespace evergreen;

namespace {

const Simulation& corpus() {
    static const Simulation sim = [] {
        GeneratorSpec spec;
        spec.n = 500;
        return simulate_corpus(spec);
    }();
    return sim;
}

const LatentBasis& basis() {
    static const LatentBasis b = estimate_basis(corpus().corpus, {}, BasisPolicy::fixed(8));
    return b;
}

}  // namespace

static void BM_FitScores(benchmark::State& state) {
    const LatentBasis b = basis().prefix(static_cast<int>(state.range(0)));
    const auto& items = corpus().corpus.items();
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_scores(items[i], b));
        i = (i + 1) % items.size();
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_FitScores)->Arg(1)->Arg(4)->Arg(8);

static void BM_FitCorpus(benchmark::State& state) {
    const LatentBasis b = basis().prefix(4);
    for (auto _ : state) benchmark::DoNotOptimize(fit_corpus(corpus().corpus, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus().corpus.size()));
}
BENCHMARK(BM_FitCorpus)->Unit(benchmark::kMillisecond);

static void BM_FitWsb(benchmark::State& state) {
    const auto& items = corpus().corpus.items();
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_wsb(items[i]));
        i = (i + 1) % items.size();
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_FitWsb)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
