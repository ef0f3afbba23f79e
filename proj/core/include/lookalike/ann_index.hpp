#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lookalike {

/// Row-major embedding storage keyed by customer id. Rows are kept as
/// written (32-bit floats, not normalized); normalization happens when an
/// index is built over them.
struct EmbeddingMatrix {
  uint32_t dim = 0;
  std::vector<uint64_t> ids;
  std::vector<float> data; // ids.size() * dim

  std::size_t row_count() const { return ids.size(); }
  std::span<const float> row(std::size_t i) const {
    return {data.data() + i * static_cast<std::size_t>(dim), dim};
  }
  void append(uint64_t id, std::span<const float> vec);
};

struct SearchHit {
  uint64_t customer_id = 0;
  double score = 0.0; // cosine similarity to the query
};

/// Exact top-min(k, n) rows by cosine similarity, score descending, ties by
/// ascending customer_id. A zero-norm query or row scores 0 rather than
/// erroring, so degenerate inputs still rank deterministically.
std::vector<SearchHit> brute_force_knn(std::span<const float> query,
                                       const EmbeddingMatrix& matrix,
                                       std::size_t k);

/// Lloyd's algorithm with k-means++ seeding, run until the assignment stops
/// changing or max_iters passes. Empty clusters are repaired by stealing the
/// point currently farthest from its own centroid. Deterministic per seed.
/// Returns nlist centroids, row-major.
std::vector<float> kmeans(std::span<const float> data, uint32_t dim,
                          uint32_t nlist, uint32_t max_iters, uint64_t rng_seed);

/// Inverted-file index: unit-normalized vectors partitioned by nearest
/// coarse centroid. Immutable once built; concurrent searches are safe.
struct IvfIndex {
  uint32_t dim = 0;
  uint32_t nlist = 0;
  std::vector<float> centroids;                 // nlist * dim
  std::vector<std::vector<uint64_t>> list_ids;  // nlist lists
  std::vector<std::vector<float>> list_vectors; // list i: list_ids[i].size() * dim

  std::size_t stored_count() const;
};

/// Normalizes every row, trains the coarse quantizer on the normalized
/// vectors, and files each row under its nearest centroid. Rows with zero
/// norm cannot be ranked under cosine and are rejected.
IvfIndex build_ivf(const EmbeddingMatrix& matrix, uint32_t nlist, uint64_t rng_seed);

/// Scans the nprobe lists whose centroids are nearest the normalized query
/// and returns the top-k stored vectors by inner product (equal to cosine,
/// stored vectors being unit norm), score descending, ties by ascending
/// customer_id. A zero-norm query has no direction to match and yields an
/// empty result.
std::vector<SearchHit> search(const IvfIndex& index, std::span<const float> query,
                              std::size_t k, uint32_t nprobe);

/// ceil(sqrt(n)) capped at 4096 (and at n itself).
uint32_t default_nlist(std::size_t row_count);
/// max(1, nlist / 8).
uint32_t default_nprobe(uint32_t nlist);

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);

void save_index(const IvfIndex& index, const std::filesystem::path& path);
IvfIndex load_index(const std::filesystem::path& path);

} // namespace lookalike
