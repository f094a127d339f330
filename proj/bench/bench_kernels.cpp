#include <benchmark/benchmark.h>

#include <random>

#include "anytime/eann.hpp"
#include "anytime/kernels.hpp"

using namespace anytime;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    for (std::size_t i = 0; i < rows; ++i)
        for (double& v : m.row(i)) v = n(rng);
    return m;
}

using MatmulFn = void (*)(const Matrix&, const Matrix&, Matrix&);

// square n x n product
template <MatmulFn F>
void BM_matmul_nn(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
    Matrix out(n, n);
    for (auto _ : state) {
        F(a, b, out);
        benchmark::DoNotOptimize(out.row(0).data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

// batch x width activations against a width x width layer, as in training
template <MatmulFn F>
void BM_matmul_nt(benchmark::State& state) {
    const auto batch = static_cast<std::size_t>(state.range(0));
    const auto width = static_cast<std::size_t>(state.range(1));
    const auto x = random_matrix(batch, width, 3), w = random_matrix(width, width, 4);
    Matrix out(batch, width);
    for (auto _ : state) {
        F(x, w, out);
        benchmark::DoNotOptimize(out.row(0).data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch * width * width));
}

using SimulateFn = eann::InflationReport (*)(const eann::EannSpec&, const eann::SimulationOptions&);

template <SimulateFn F>
void BM_simulate(benchmark::State& state) {
    eann::EannSpec spec;
    spec.base = 2.0;
    spec.member_count = 16;
    eann::SimulationOptions opt;
    opt.samples = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(F(spec, opt).mean_c);
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * opt.samples));
}

}  // namespace

BENCHMARK(BM_matmul_nn<kernels::matmul_nn>)->Name("matmul_nn/parallel")->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_matmul_nn<kernels::reference::matmul_nn>)->Name("matmul_nn/reference")->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_matmul_nt<kernels::matmul_nt>)->Name("matmul_nt/parallel")->Args({32, 24})->Args({256, 256});
BENCHMARK(BM_matmul_nt<kernels::reference::matmul_nt>)->Name("matmul_nt/reference")->Args({32, 24})->Args({256, 256});
BENCHMARK(BM_simulate<eann::simulate_inflation>)->Name("simulate_inflation/parallel")->Arg(1'000'000);
BENCHMARK(BM_simulate<eann::reference::simulate_inflation>)
    ->Name("simulate_inflation/reference")
    ->Arg(1'000'000);

BENCHMARK_MAIN();
