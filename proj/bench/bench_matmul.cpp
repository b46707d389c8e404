#include <benchmark/benchmark.h>

#include "tsmi/matrix.hpp"
#include "tsmi/rng.hpp"

using namespace tsmi;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    Rng rng(seed);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<real>(normal(rng));
    return m;
}

void BM_matmul_parallel(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 1);
    const Matrix b = random_matrix(n, n, 2);
    for (auto _ : state) {
        Matrix c = matmul(a, b);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void BM_matmul_serial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 1);
    const Matrix b = random_matrix(n, n, 2);
    for (auto _ : state) {
        Matrix c = matmul_serial(a, b);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void BM_matmul_nt_parallel(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 3);
    const Matrix b = random_matrix(n, n, 4);
    for (auto _ : state) {
        Matrix c = matmul_nt(a, b);
        benchmark::DoNotOptimize(c.data());
    }
}

void BM_matmul_nt_serial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 3);
    const Matrix b = random_matrix(n, n, 4);
    for (auto _ : state) {
        Matrix c = matmul_nt_serial(a, b);
        benchmark::DoNotOptimize(c.data());
    }
}

void BM_matmul_tn_parallel(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 5);
    const Matrix b = random_matrix(n, n, 6);
    for (auto _ : state) {
        Matrix c = matmul_tn(a, b);
        benchmark::DoNotOptimize(c.data());
    }
}

void BM_matmul_tn_serial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 5);
    const Matrix b = random_matrix(n, n, 6);
    for (auto _ : state) {
        Matrix c = matmul_tn_serial(a, b);
        benchmark::DoNotOptimize(c.data());
    }
}

}  // namespace

BENCHMARK(BM_matmul_parallel)->Arg(64)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(BM_matmul_serial)->Arg(64)->Arg(128)->Arg(256)->Arg(512);
BENCHMARK(BM_matmul_nt_parallel)->Arg(128)->Arg(256);
BENCHMARK(BM_matmul_nt_serial)->Arg(128)->Arg(256);
BENCHMARK(BM_matmul_tn_parallel)->Arg(128)->Arg(256);
BENCHMARK(BM_matmul_tn_serial)->Arg(128)->Arg(256);

BENCHMARK_MAIN();
