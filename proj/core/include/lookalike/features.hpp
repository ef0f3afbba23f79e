#pragma once

#include "lookalike/customer_data.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lookalike {

/// Fixed feature layout: z-scored dense fields, then one one-hot block per
/// categorical field, then the location embedding.
struct FeatureSchema {
  std::vector<std::string> dense_fields;
  std::vector<std::pair<std::string, std::vector<std::string>>> categorical_fields;
  uint32_t location_dim = 0;

  std::size_t total_width() const;
};

void save_schema(const FeatureSchema& schema, const std::filesystem::path& path);
FeatureSchema load_schema(const std::filesystem::path& path);

/// Collects dense field names and categorical vocabularies observed in a
/// record set (sorted for stability) and stamps the requested location_dim.
FeatureSchema infer_schema(std::span<const CustomerRecord> records,
                           uint32_t location_dim);

/// Per-dense-field mean and population standard deviation.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Missing dense values count as 0 toward both moments.
FeatureStats fit_normalizer(std::span<const CustomerRecord> records,
                            const FeatureSchema& schema);

/// Token -> vector map loaded from the plain-text word-vector format
/// (token followed by its components, space separated, one per line).
struct WordVectorTable {
  uint32_t dimension = 0;
  std::unordered_map<std::string, std::vector<float>> entries;
};

WordVectorTable load_word_vectors(const std::filesystem::path& path);
void save_word_vectors(const WordVectorTable& table, const std::filesystem::path& path);

/// Lowercases, splits on non-alphanumeric runs, and averages the vectors of
/// in-vocabulary tokens. No token in vocabulary -> zero vector.
std::vector<double> embed_location(std::string_view text, const WordVectorTable& table);

/// Deterministic stand-in for a pretrained vector file: one random unit
/// vector per purely alphabetic token seen in the records' location text.
/// Each token's vector depends only on the token and the seed, never on
/// which records contain it. Numeric tokens (street numbers, zips) are left
/// out of vocabulary on purpose.
WordVectorTable synthesize_location_vectors(std::span<const CustomerRecord> records,
                                            uint32_t dimension, uint64_t rng_seed);

/// Seam for swapping the location text encoder. The shipped implementation
/// averages word vectors; heavier contextual encoders can plug in behind
/// the same interface.
class TextEncoder {
public:
  virtual ~TextEncoder() = default;
  virtual uint32_t dimension() const = 0;
  virtual std::vector<double> encode(std::string_view text) const = 0;
};

class WordAveragingEncoder final : public TextEncoder {
public:
  explicit WordAveragingEncoder(WordVectorTable table) : table_(std::move(table)) {}
  uint32_t dimension() const override { return table_.dimension; }
  std::vector<double> encode(std::string_view text) const override {
    return embed_location(text, table_);
  }
  const WordVectorTable& table() const { return table_; }

private:
  WordVectorTable table_;
};

using FeatureVector = std::vector<double>;

/// Builds the model input: [z-scored dense | one-hot blocks | location].
/// `encoder` may be null when schema.location_dim is 0; otherwise its
/// dimension must match the schema.
FeatureVector extract_features(const CustomerRecord& record,
                               const FeatureSchema& schema,
                               const FeatureStats& stats,
                               const TextEncoder* encoder);

/// Everything needed to featurize a record, bundled for the training and
/// embedding paths.
struct FeatureContext {
  FeatureSchema schema;
  FeatureStats stats;
  std::shared_ptr<const TextEncoder> encoder; // null when location_dim == 0

  FeatureVector extract(const CustomerRecord& record) const {
    return extract_features(record, schema, stats, encoder.get());
  }
};

} // namespace lookalike
