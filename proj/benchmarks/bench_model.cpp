#include <benchmark/benchmark.h>

#include "lookalike/customer_data.hpp"
#include "lookalike/features.hpp"
#include "lookalike/model.hpp"

#include <random>
#include <vector>

using namespace lookalike;

namespace {

struct ModelBench {
  MlpParams params;
  std::vector<PairExample> batch;
  std::vector<CustomerRecord> records;
  FeatureContext context;

  ModelBench() {
    SynthConfig cfg;
    cfg.n_customers = 2000;
    cfg.rng_seed = 2;
    records = generate_synthetic(cfg);
    context.schema = infer_schema(records, 0);
    context.stats = fit_normalizer(records, context.schema);

    TrainConfig tc;
    tc.embedding_dim = 32;
    tc.hidden_dims = {64, 32};
    tc.rng_seed = 3;
    const auto width = static_cast<uint32_t>(context.schema.total_width());
    params = init_params(width, tc);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> feat(0.0, 1.0);
    std::uniform_real_distribution<double> tgt(0.0, 1.0);
    batch.resize(256);
    for (auto& ex : batch) {
      ex.x_a.resize(width);
      ex.x_b.resize(width);
      for (auto& v : ex.x_a) v = feat(rng);
      for (auto& v : ex.x_b) v = feat(rng);
      ex.target = tgt(rng);
    }
  }
};

const ModelBench& fixture() {
  static const ModelBench bench;
  return bench;
}

} // namespace

static void BM_Forward(benchmark::State& state) {
  const auto& b = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(forward(b.params, b.batch[0].x_a));
}
BENCHMARK(BM_Forward);

static void BM_PredictSimilarity(benchmark::State& state) {
  const auto& b = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(predict_similarity(b.params, b.batch[0].x_a, b.batch[0].x_b));
}
BENCHMARK(BM_PredictSimilarity);

static void BM_BackwardBatch256(benchmark::State& state) {
  const auto& b = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(backward(b.params, b.batch));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * 256);
}
BENCHMARK(BM_BackwardBatch256)->Unit(benchmark::kMillisecond);

static void BM_EmbedAll(benchmark::State& state) {
  const auto& b = fixture();
  const auto threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(embed_all(b.params, b.records, b.context, threads));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(b.records.size()));
}
BENCHMARK(BM_EmbedAll)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);
