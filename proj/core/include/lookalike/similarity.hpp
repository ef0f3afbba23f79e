#pragma once

#include "lookalike/customer_data.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lookalike {

enum class MetricKind : uint8_t { Cosine, Jaccard, EuclideanMapped };

std::string_view to_string(MetricKind kind);
std::optional<MetricKind> metric_from_string(std::string_view name);

/// Ground-truth similarity family: one metric applied to the per-category
/// activity of one channel.
struct SimilarityMetric {
  MetricKind kind = MetricKind::Cosine;
  Channel channel = Channel::Transaction;
};

/// dot(a,b) / (|a||b|), with the all-zero convention: either vector zero
/// means similarity 0. Non-negative inputs keep the result in [0, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Support overlap |S_a ∩ S_b| / |S_a ∪ S_b| where S_x = {i : x_i > 0}.
/// Two empty supports count as identical (1.0).
double jaccard_similarity(std::span<const double> a, std::span<const double> b);

/// Euclidean distance mapped onto (0, 1] via 1 / (1 + |a - b|).
double euclidean_mapped_similarity(std::span<const double> a,
                                   std::span<const double> b);

/// Applies the metric to the two records' activity vectors for the metric's
/// channel, aggregated over `window`.
double pair_target(const CustomerRecord& a, const CustomerRecord& b,
                   SimilarityMetric metric, TimeWindow window,
                   uint32_t n_categories);

/// A supervised example: two customer ids and their true similarity.
struct LabeledPair {
  uint64_t id_a = 0;
  uint64_t id_b = 0;
  double target = 0.0;
};

/// Samples n_pairs distinct unordered pairs, deterministically per seed.
/// Half the pairs are uniform; half are anchored on a shared high-activity
/// category, which keeps the target distribution away from a spike at 0.
std::vector<LabeledPair> make_training_pairs(
    std::span<const CustomerRecord> records, SimilarityMetric metric,
    TimeWindow window, std::size_t n_pairs, uint64_t rng_seed,
    uint32_t n_categories);

/// Optional JSONL pair cache: one {id_a, id_b, target} object per line.
void save_pairs(std::span<const LabeledPair> pairs, const std::filesystem::path& path);
std::vector<LabeledPair> load_pairs(const std::filesystem::path& path);

} // namespace lookalike
