#include "evergreen/clustering.hpp"

#include <Eigen/Dense>
#include <benchmark/benchmark.h>

#include <random>

using namespace evergreen;

namespace {

Eigen::MatrixXd points(Eigen::Index n) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    Eigen::MatrixXd x(n, 4);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = g(rng) + 3.0 * static_cast<double>(i % 4 == j);
    return x;
}

}  // namespace

static void BM_KMeans(benchmark::State& state) {
    const Eigen::MatrixXd x = points(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(kmeans(x, 4, 1));
}
BENCHMARK(BM_KMeans)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_KMedoids(benchmark::State& state) {
    const Eigen::MatrixXd x = points(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(kmedoids(x, 4, 1));
}
BENCHMARK(BM_KMedoids)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_Ward(benchmark::State& state) {
    const Eigen::MatrixXd x = points(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(ward_merges(x));
}
BENCHMARK(BM_Ward)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
