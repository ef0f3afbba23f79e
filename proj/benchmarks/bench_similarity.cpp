#include <benchmark/benchmark.h>

#include "lookalike/customer_data.hpp"
#include "lookalike/similarity.hpp"

#include <random>
#include <vector>

using namespace lookalike;

namespace {

std::vector<double> random_activity(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_real_distribution<double> val(0.0, 10.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = coin(rng) < 0.4 ? 0.0 : val(rng);
  return v;
}

const std::vector<CustomerRecord>& bench_universe() {
  static const auto records = [] {
    SynthConfig cfg;
    cfg.n_customers = 2000;
    cfg.rng_seed = 1;
    return generate_synthetic(cfg);
  }();
  return records;
}

} // namespace

static void BM_CosineSimilarity(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto a = random_activity(rng, dim);
  const auto b = random_activity(rng, dim);
  for (auto _ : state) benchmark::DoNotOptimize(cosine_similarity(a, b));
}
BENCHMARK(BM_CosineSimilarity)->Arg(20)->Arg(128);

static void BM_JaccardSimilarity(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto a = random_activity(rng, dim);
  const auto b = random_activity(rng, dim);
  for (auto _ : state) benchmark::DoNotOptimize(jaccard_similarity(a, b));
}
BENCHMARK(BM_JaccardSimilarity)->Arg(20)->Arg(128);

static void BM_EuclideanMappedSimilarity(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto a = random_activity(rng, dim);
  const auto b = random_activity(rng, dim);
  for (auto _ : state) benchmark::DoNotOptimize(euclidean_mapped_similarity(a, b));
}
BENCHMARK(BM_EuclideanMappedSimilarity)->Arg(20)->Arg(128);

static void BM_PairTarget(benchmark::State& state) {
  const auto& records = bench_universe();
  const SimilarityMetric metric{MetricKind::Cosine, Channel::Transaction};
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& a = records[i % records.size()];
    const auto& b = records[(i * 7 + 1) % records.size()];
    benchmark::DoNotOptimize(pair_target(a, b, metric, {0, 270}, 20));
    ++i;
  }
}
BENCHMARK(BM_PairTarget);

static void BM_MakeTrainingPairs(benchmark::State& state) {
  const auto& records = bench_universe();
  const SimilarityMetric metric{MetricKind::Cosine, Channel::Transaction};
  const auto n_pairs = static_cast<std::size_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(make_training_pairs(records, metric, {0, 270}, n_pairs, 3, 20));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(n_pairs));
}
BENCHMARK(BM_MakeTrainingPairs)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
