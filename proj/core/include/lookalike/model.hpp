#pragma once

#include "lookalike/customer_data.hpp"
#include "lookalike/features.hpp"
#include "lookalike/similarity.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lookalike {

/// One fully connected layer, weights row-major (out_dim x in_dim).
struct LayerParams {
  uint32_t out_dim = 0;
  uint32_t in_dim = 0;
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Shared-tower feed-forward network: ReLU after every layer except the
/// last, which stays linear so embeddings keep their raw scale.
struct MlpParams {
  std::vector<LayerParams> layers;

  uint32_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
  uint32_t embedding_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }
  std::size_t parameter_count() const;
};

struct TrainConfig {
  uint32_t embedding_dim = 128;
  std::vector<uint32_t> hidden_dims = {256, 128};
  double learning_rate = 1e-3;
  uint32_t batch_size = 256;
  uint32_t epochs = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  uint64_t rng_seed = 1;
};

struct TrainReport {
  std::vector<double> train_loss; // per epoch
  std::vector<double> val_mae;    // per epoch; NaN entries when no val pairs
  double test_mae = std::numeric_limits<double>::quiet_NaN();
};

/// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases,
/// deterministic per seed.
MlpParams init_params(uint32_t input_dim, const TrainConfig& config);

/// MlpParams-shaped container of zeros, for gradients and optimizer state.
MlpParams zeros_like(const MlpParams& params);

std::vector<double> forward(const MlpParams& params, std::span<const double> x);

/// Cosine of the two embeddings; 0 if either has norm below 1e-12.
double predict_similarity(const MlpParams& params, std::span<const double> x_a,
                          std::span<const double> x_b);

inline double l1_loss(double pred, double target) {
  return pred >= target ? pred - target : target - pred;
}

/// One supervised pair with features already extracted.
struct PairExample {
  FeatureVector x_a;
  FeatureVector x_b;
  double target = 0.0;
};

struct BackwardResult {
  MlpParams gradients; // d(mean L1 loss)/d(params), both towers accumulated
  double loss = 0.0;   // mean L1 loss over the batch
};

/// Analytic gradient of the mean L1 loss over the batch. Subgradient
/// conventions: d|u|/du = 0 at u = 0 and dReLU/dz = 0 at z = 0; pairs whose
/// embedding collapses to zero norm contribute zero gradient.
BackwardResult backward(const MlpParams& params, std::span<const PairExample> batch);

/// Mean L1 loss over the batch, sharing predict_similarity's conventions.
double batch_loss(const MlpParams& params, std::span<const PairExample> batch);

double mean_absolute_error(std::span<const double> preds,
                           std::span<const double> targets);

using FeatureMap = std::unordered_map<uint64_t, FeatureVector>;

FeatureMap build_feature_map(std::span<const CustomerRecord> records,
                             const FeatureContext& context);

double evaluate_mae(const MlpParams& params, std::span<const LabeledPair> pairs,
                    const FeatureMap& features);

/// Adam over seeded shuffled mini-batches. Deterministic for a fixed seed
/// (training is single threaded). Throws DataError before any update if a
/// pair references an unknown customer id.
std::pair<MlpParams, TrainReport> train_model(
    std::span<const CustomerRecord> records,
    std::span<const LabeledPair> train_pairs,
    std::span<const LabeledPair> val_pairs,
    std::span<const LabeledPair> test_pairs, const FeatureContext& context,
    const TrainConfig& config);

/// One embedding per record, input order preserved. Safe to fan out across
/// threads; results are identical to a serial run.
std::vector<std::pair<uint64_t, std::vector<double>>> embed_all(
    const MlpParams& params, std::span<const CustomerRecord> records,
    const FeatureContext& context, unsigned threads = 1);

/// Self-describing model file: network weights plus the feature schema and
/// normalizer stats needed to reproduce its inputs.
void save_model(const MlpParams& params, const FeatureSchema& schema,
                const FeatureStats& stats, const std::filesystem::path& path);

struct LoadedModel {
  MlpParams params;
  FeatureSchema schema;
  FeatureStats stats;
};

LoadedModel load_model(const std::filesystem::path& path);

} // namespace lookalike
