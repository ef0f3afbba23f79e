#include <benchmark/benchmark.h>

#include "lookalike/ann_index.hpp"

#include <random>
#include <vector>

using namespace lookalike;

namespace {

EmbeddingMatrix random_matrix(std::size_t n, uint32_t dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> unit(0.0f, 1.0f);
  EmbeddingMatrix m;
  std::vector<float> row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : row) v = unit(rng);
    m.append(i, row);
  }
  return m;
}

const EmbeddingMatrix& bench_matrix() {
  static const auto m = random_matrix(10000, 32, 5);
  return m;
}

const IvfIndex& bench_index() {
  static const auto index = build_ivf(bench_matrix(), 64, 6);
  return index;
}

std::vector<float> bench_query(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> unit(0.0f, 1.0f);
  std::vector<float> q(32);
  for (auto& v : q) v = unit(rng);
  return q;
}

} // namespace

static void BM_BuildIvf(benchmark::State& state) {
  const auto& m = bench_matrix();
  const auto nlist = static_cast<uint32_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_ivf(m, nlist, 7));
}
BENCHMARK(BM_BuildIvf)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_BruteForceKnn(benchmark::State& state) {
  const auto& m = bench_matrix();
  const auto q = bench_query(8);
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_knn(q, m, 100));
}
BENCHMARK(BM_BruteForceKnn)->Unit(benchmark::kMicrosecond);

static void BM_Search(benchmark::State& state) {
  const auto& index = bench_index();
  const auto q = bench_query(9);
  const auto nprobe = static_cast<uint32_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(search(index, q, 100, nprobe));
}
BENCHMARK(BM_Search)->Arg(1)->Arg(4)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);
