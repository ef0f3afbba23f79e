#pragma once

#include "lookalike/ann_index.hpp"
#include "lookalike/customer_data.hpp"
#include "lookalike/features.hpp"
#include "lookalike/model.hpp"
#include "lookalike/similarity.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lookalike {

/// Keeps a returned customer only if its demographics value for `field` is
/// one of `allowed`.
struct AttributeFilter {
  std::string field;
  std::vector<std::string> allowed;
};

struct ExpansionRequest {
  std::vector<uint64_t> seed_ids; // nonempty, unique
  uint32_t k_per_seed = 100;
  uint32_t output_size = 1000;
  bool exclude_seeds = true;
  std::vector<AttributeFilter> attribute_filters;
  uint32_t nprobe = 0; // 0 = index default
};

struct ExpansionEntry {
  uint64_t customer_id = 0;
  double score = 0.0;
  uint64_t best_seed_id = 0;
};

struct ExpansionResult {
  std::vector<ExpansionEntry> entries; // score descending, ties by ascending id
  std::string model_path;
  std::string index_path;
  ExpansionRequest request; // echo of what produced the entries
  double elapsed_ms = 0.0;
  std::string note; // set when the result is empty for a benign reason
};

/// Model plus featurization context for seeds that have no stored embedding.
struct ModelHandle {
  const MlpParams* params = nullptr;
  const FeatureContext* context = nullptr;
};

/// Online stage: embeds each seed (stored embedding if present, else the
/// model), searches k_per_seed + |seeds| per seed, merges hits keeping each
/// customer's maximum score (ties go to the smaller seed id), applies
/// exclusions and filters, and truncates to output_size.
ExpansionResult expand(const ExpansionRequest& request, const IvfIndex& index,
                       const EmbeddingMatrix& embeddings,
                       std::span<const CustomerRecord> universe,
                       const ModelHandle& model = {});

struct OfflineConfig {
  uint32_t nlist = 0; // 0 = default for the indexed row count
  uint64_t rng_seed = 1;
  unsigned threads = 1;
  /// Required when the model's schema embeds location text.
  std::filesystem::path word_vectors;
};

struct OfflineReport {
  std::filesystem::path embedding_path;
  std::filesystem::path index_path;
  std::vector<uint64_t> skipped_ids; // zero-norm embeddings, never indexed
  std::size_t indexed_count = 0;
};

/// Offline stage: embeds the whole universe with the stored model and
/// persists the embedding file and IVF index under out_dir. Reruns with the
/// same inputs and seed write byte-identical artifacts. Customers whose
/// embedding has zero norm are listed in skipped_ids (and in a skip file
/// next to the artifacts) and left out of both files.
OfflineReport offline_stage(const std::filesystem::path& universe_path,
                            const std::filesystem::path& model_path,
                            const OfflineConfig& config,
                            const std::filesystem::path& out_dir);

struct ComparisonConfig {
  SimilarityMetric metric;
  TimeWindow train_window{0, 270};
  TimeWindow val_window{270, 315};
  TimeWindow test_window{315, 360};
  std::size_t train_pairs = 20000;
  std::size_t val_pairs = 2000;
  std::size_t test_pairs = 4000;
  uint64_t pair_seed = 7;
  std::vector<uint64_t> train_seeds = {1, 2, 3};
  TrainConfig base; // epochs, batch size, learning rate, embedding dim
  std::vector<uint32_t> hidden_two = {64, 32};
  std::vector<uint32_t> hidden_three = {64, 64, 32};
};

struct VariantResult {
  std::string name;
  bool uses_location = false;
  std::size_t hidden_layers = 2;
  std::vector<double> seed_mae; // test MAE per training seed
  double mean_mae = 0.0;
  double relative_pct = 100.0; // mean MAE as % of the first row's
};

struct ComparisonReport {
  std::vector<VariantResult> variants; // baseline (2 hidden, no location) first
};

/// Trains {no location, word-vector location} x {2, 3 hidden layers} on
/// identical pair sets and training seeds, reporting absolute test MAE and
/// MAE relative to the 2-hidden/no-location baseline. `word_vectors` must
/// be non-null (location variants need it).
ComparisonReport run_model_comparison(std::span<const CustomerRecord> records,
                                      const ComparisonConfig& config,
                                      const WordVectorTable* word_vectors);

/// Stable JSON document (sorted keys, shortest round-trip numbers). Timing
/// is opt-in so identical runs serialize to identical bytes.
std::string expansion_to_json(const ExpansionResult& result,
                              bool include_timing = false);
std::string expansion_to_csv(const ExpansionResult& result);
ExpansionResult expansion_from_json(const std::string& text);

} // namespace lookalike
