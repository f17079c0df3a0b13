#include "evergreen/symmetric_eigen.hpp"

#include <Eigen/Dense>
#include <benchmark/benchmark.h>

#include <random>

using namespace evergreen;

static void BM_Jacobi(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = g(rng);
    const Eigen::MatrixXd c = a * a.transpose();
    for (auto _ : state) benchmark::DoNotOptimize(eigendecompose_symmetric(c, 1.0));
}
BENCHMARK(BM_Jacobi)->Arg(8)->Arg(30)->Arg(60)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
