#include "lookalike/ann_index.hpp"

#include "lookalike/binary_io.hpp"
#include "lookalike/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace lookalike {

namespace {

constexpr double kNormFloor = 1e-12;
constexpr uint32_t kIndexVersion = 1;
constexpr uint32_t kEmbeddingVersion = 1;
constexpr uint32_t kKmeansMaxIters = 25;

double dot_f32(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return s;
}

double norm_f32(std::span<const float> v) { return std::sqrt(dot_f32(v, v)); }

double sq_dist(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

bool hit_before(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.customer_id < b.customer_id;
}

void sort_top_k(std::vector<SearchHit>& hits, std::size_t k) {
  if (hits.size() > k) {
    std::partial_sort(hits.begin(), hits.begin() + k, hits.end(), hit_before);
    hits.resize(k);
  } else {
    std::sort(hits.begin(), hits.end(), hit_before);
  }
}

void check_unique_ids(const EmbeddingMatrix& matrix, const std::string& what) {
  std::unordered_set<uint64_t> seen;
  seen.reserve(matrix.ids.size());
  for (uint64_t id : matrix.ids) {
    if (!seen.insert(id).second) {
      throw DataError(what + ": duplicate customer id " + std::to_string(id));
    }
  }
}

} // namespace

void EmbeddingMatrix::append(uint64_t id, std::span<const float> vec) {
  if (dim == 0) dim = static_cast<uint32_t>(vec.size());
  if (vec.size() != dim) {
    throw std::invalid_argument("embedding has width " + std::to_string(vec.size()) +
                                ", matrix expects " + std::to_string(dim));
  }
  ids.push_back(id);
  data.insert(data.end(), vec.begin(), vec.end());
}

std::vector<SearchHit> brute_force_knn(std::span<const float> query,
                                       const EmbeddingMatrix& matrix,
                                       std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be positive");
  if (query.size() != matrix.dim) {
    throw std::invalid_argument("query has width " + std::to_string(query.size()) +
                                ", matrix holds width " + std::to_string(matrix.dim));
  }
  const double qnorm = norm_f32(query);
  std::vector<SearchHit> hits;
  hits.reserve(matrix.row_count());
  for (std::size_t i = 0; i < matrix.row_count(); ++i) {
    const std::span<const float> r = matrix.row(i);
    const double rnorm = norm_f32(r);
    double score = 0.0;
    if (qnorm >= kNormFloor && rnorm >= kNormFloor) {
      score = dot_f32(query, r) / (qnorm * rnorm);
    }
    hits.push_back({matrix.ids[i], score});
  }
  sort_top_k(hits, k);
  return hits;
}

std::vector<float> kmeans(std::span<const float> data, uint32_t dim,
                          uint32_t nlist, uint32_t max_iters, uint64_t rng_seed) {
  if (dim == 0) throw std::invalid_argument("dim must be positive");
  if (data.size() % dim != 0) {
    throw std::invalid_argument("data size is not a multiple of dim");
  }
  const std::size_t n = data.size() / dim;
  if (nlist == 0) throw std::invalid_argument("nlist must be positive");
  if (nlist > n) {
    throw std::invalid_argument("nlist " + std::to_string(nlist) +
                                " exceeds vector count " + std::to_string(n));
  }
  if (max_iters == 0) throw std::invalid_argument("max_iters must be positive");

  auto point = [&](std::size_t i) -> std::span<const float> {
    return data.subspan(i * dim, dim);
  };

  std::mt19937_64 rng(rng_seed);
  std::vector<float> centroids(static_cast<std::size_t>(nlist) * dim);
  auto centroid = [&](std::size_t c) -> std::span<float> {
    return {centroids.data() + c * dim, dim};
  };

  // k-means++ seeding: first pick uniform, the rest proportional to the
  // squared distance from the nearest centroid chosen so far.
  std::vector<double> min_d2(n, std::numeric_limits<double>::max());
  {
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::size_t pick = first(rng);
    std::copy_n(point(pick).begin(), dim, centroid(0).begin());
    for (std::size_t i = 0; i < n; ++i) min_d2[i] = sq_dist(point(i), centroid(0));
    for (uint32_t c = 1; c < nlist; ++c) {
      double total = 0.0;
      for (double d : min_d2) total += d;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        pick = n - 1;
        double cum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          cum += min_d2[i];
          if (cum >= target) {
            pick = i;
            break;
          }
        }
      } else {
        // All remaining points coincide with a centroid; spread over the
        // lowest untouched indices so nlist distinct slots still get filled.
        pick = c % n;
      }
      std::copy_n(point(pick).begin(), dim, centroid(c).begin());
      for (std::size_t i = 0; i < n; ++i) {
        min_d2[i] = std::min(min_d2[i], sq_dist(point(i), centroid(c)));
      }
    }
  }

  std::vector<uint32_t> assign(n, 0);
  std::vector<uint32_t> prev_assign(n, std::numeric_limits<uint32_t>::max());
  std::vector<std::size_t> cluster_size(nlist, 0);
  std::vector<double> sums(static_cast<std::size_t>(nlist) * dim);

  for (uint32_t iter = 0; iter < max_iters; ++iter) {
    std::fill(cluster_size.begin(), cluster_size.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      uint32_t best_c = 0;
      for (uint32_t c = 0; c < nlist; ++c) {
        const double d = sq_dist(point(i), centroid(c));
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      assign[i] = best_c;
      ++cluster_size[best_c];
    }

    // Empty-cluster repair: hand each empty cluster the point farthest from
    // its current centroid, skipping clusters that would become empty
    // themselves.
    for (uint32_t c = 0; c < nlist; ++c) {
      if (cluster_size[c] != 0) continue;
      double worst = -1.0;
      std::size_t steal = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (cluster_size[assign[i]] <= 1) continue;
        const double d = sq_dist(point(i), centroid(assign[i]));
        if (d > worst) {
          worst = d;
          steal = i;
        }
      }
      if (steal == n) break;
      --cluster_size[assign[steal]];
      assign[steal] = c;
      cluster_size[c] = 1;
      std::copy_n(point(steal).begin(), dim, centroid(c).begin());
    }

    if (assign == prev_assign) break;
    prev_assign = assign;

    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* s = sums.data() + static_cast<std::size_t>(assign[i]) * dim;
      const std::span<const float> p = point(i);
      for (uint32_t d = 0; d < dim; ++d) s[d] += p[d];
    }
    for (uint32_t c = 0; c < nlist; ++c) {
      if (cluster_size[c] == 0) continue;
      const double inv = 1.0 / static_cast<double>(cluster_size[c]);
      const double* s = sums.data() + static_cast<std::size_t>(c) * dim;
      std::span<float> dst = centroid(c);
      for (uint32_t d = 0; d < dim; ++d) dst[d] = static_cast<float>(s[d] * inv);
    }
  }

  return centroids;
}

std::size_t IvfIndex::stored_count() const {
  std::size_t total = 0;
  for (const auto& ids : list_ids) total += ids.size();
  return total;
}

IvfIndex build_ivf(const EmbeddingMatrix& matrix, uint32_t nlist, uint64_t rng_seed) {
  if (matrix.row_count() == 0) throw std::invalid_argument("embedding matrix is empty");
  if (matrix.dim == 0) throw std::invalid_argument("embedding matrix has zero dim");
  if (nlist == 0 || nlist > matrix.row_count()) {
    throw std::invalid_argument("nlist " + std::to_string(nlist) +
                                " out of range for " + std::to_string(matrix.row_count()) +
                                " rows");
  }
  check_unique_ids(matrix, "build_ivf");

  const uint32_t dim = matrix.dim;
  std::vector<float> unit(matrix.data.size());
  for (std::size_t i = 0; i < matrix.row_count(); ++i) {
    const std::span<const float> r = matrix.row(i);
    const double norm = norm_f32(r);
    if (norm < kNormFloor) {
      throw DataError("cannot index zero-norm embedding for customer " +
                      std::to_string(matrix.ids[i]));
    }
    float* dst = unit.data() + i * static_cast<std::size_t>(dim);
    for (uint32_t d = 0; d < dim; ++d) dst[d] = static_cast<float>(r[d] / norm);
  }

  IvfIndex index;
  index.dim = dim;
  index.nlist = nlist;
  index.centroids = kmeans(unit, dim, nlist, kKmeansMaxIters, rng_seed);
  index.list_ids.resize(nlist);
  index.list_vectors.resize(nlist);

  for (std::size_t i = 0; i < matrix.row_count(); ++i) {
    const std::span<const float> v{unit.data() + i * static_cast<std::size_t>(dim), dim};
    double best = std::numeric_limits<double>::max();
    uint32_t best_c = 0;
    for (uint32_t c = 0; c < nlist; ++c) {
      const std::span<const float> cent{index.centroids.data() + c * static_cast<std::size_t>(dim), dim};
      const double d = sq_dist(v, cent);
      if (d < best) {
        best = d;
        best_c = c;
      }
    }
    index.list_ids[best_c].push_back(matrix.ids[i]);
    index.list_vectors[best_c].insert(index.list_vectors[best_c].end(), v.begin(), v.end());
  }
  return index;
}

std::vector<SearchHit> search(const IvfIndex& index, std::span<const float> query,
                              std::size_t k, uint32_t nprobe) {
  if (k == 0) throw std::invalid_argument("k must be positive");
  if (nprobe == 0 || nprobe > index.nlist) {
    throw std::invalid_argument("nprobe " + std::to_string(nprobe) +
                                " out of range for nlist " + std::to_string(index.nlist));
  }
  if (query.size() != index.dim) {
    throw std::invalid_argument("query has width " + std::to_string(query.size()) +
                                ", index holds width " + std::to_string(index.dim));
  }
  const double qnorm = norm_f32(query);
  if (qnorm < kNormFloor) return {};

  std::vector<float> qn(index.dim);
  for (uint32_t d = 0; d < index.dim; ++d) {
    qn[d] = static_cast<float>(query[d] / qnorm);
  }

  std::vector<std::pair<double, uint32_t>> by_dist;
  by_dist.reserve(index.nlist);
  for (uint32_t c = 0; c < index.nlist; ++c) {
    const std::span<const float> cent{index.centroids.data() + c * static_cast<std::size_t>(index.dim), index.dim};
    by_dist.emplace_back(sq_dist(qn, cent), c);
  }
  std::partial_sort(by_dist.begin(), by_dist.begin() + nprobe, by_dist.end());

  std::vector<SearchHit> hits;
  for (uint32_t p = 0; p < nprobe; ++p) {
    const uint32_t c = by_dist[p].second;
    const std::vector<uint64_t>& ids = index.list_ids[c];
    const std::vector<float>& vecs = index.list_vectors[c];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::span<const float> v{vecs.data() + i * static_cast<std::size_t>(index.dim), index.dim};
      hits.push_back({ids[i], dot_f32(qn, v)});
    }
  }
  sort_top_k(hits, k);
  return hits;
}

uint32_t default_nlist(std::size_t row_count) {
  if (row_count == 0) return 1;
  const auto root = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(row_count))));
  const std::size_t capped = std::min<std::size_t>({root, 4096, row_count});
  return static_cast<uint32_t>(std::max<std::size_t>(1, capped));
}

uint32_t default_nprobe(uint32_t nlist) { return std::max(1u, nlist / 8); }

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  if (matrix.dim == 0 && matrix.row_count() > 0) {
    throw std::invalid_argument("embedding matrix has zero dim");
  }
  check_unique_ids(matrix, "save_embeddings");
  BinaryWriter w(path);
  w.write_magic("LKEV");
  w.write_u32(kEmbeddingVersion);
  w.write_u64(matrix.row_count());
  w.write_u32(matrix.dim);
  for (std::size_t i = 0; i < matrix.row_count(); ++i) {
    w.write_u64(matrix.ids[i]);
    w.write_f32_span(matrix.row(i));
  }
  w.close();
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic("LKEV");
  const uint32_t version = r.read_u32("version");
  if (version != kEmbeddingVersion) {
    throw DataError("'" + path.string() + "': unsupported embedding file version " +
                    std::to_string(version));
  }
  const uint64_t count = r.read_u64("row count");
  const uint32_t dim = r.read_u32("dim");
  if (count > 0 && dim == 0) {
    throw DataError("'" + path.string() + "': zero dim with nonzero row count");
  }
  EmbeddingMatrix matrix;
  matrix.dim = dim;
  matrix.ids.reserve(count);
  matrix.data.resize(count * static_cast<std::size_t>(dim));
  for (uint64_t i = 0; i < count; ++i) {
    matrix.ids.push_back(r.read_u64("customer id"));
    r.read_f32_into({matrix.data.data() + i * dim, dim}, "embedding row");
  }
  if (!r.at_eof()) {
    throw DataError("'" + path.string() + "': trailing bytes at offset " +
                    std::to_string(r.offset()));
  }
  check_unique_ids(matrix, "'" + path.string() + "'");
  return matrix;
}

void save_index(const IvfIndex& index, const std::filesystem::path& path) {
  if (index.nlist == 0 || index.dim == 0) {
    throw std::invalid_argument("index has zero nlist or dim");
  }
  if (index.list_ids.size() != index.nlist || index.list_vectors.size() != index.nlist) {
    throw std::invalid_argument("index posting lists do not match nlist");
  }
  BinaryWriter w(path);
  w.write_magic("LKIX");
  w.write_u32(kIndexVersion);
  w.write_u32(index.dim);
  w.write_u32(index.nlist);
  w.write_f32_span(index.centroids);
  for (uint32_t c = 0; c < index.nlist; ++c) {
    w.write_u64(index.list_ids[c].size());
    const std::vector<uint64_t>& ids = index.list_ids[c];
    const std::vector<float>& vecs = index.list_vectors[c];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      w.write_u64(ids[i]);
      w.write_f32_span({vecs.data() + i * static_cast<std::size_t>(index.dim), index.dim});
    }
  }
  w.close();
}

IvfIndex load_index(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic("LKIX");
  const uint32_t version = r.read_u32("version");
  if (version != kIndexVersion) {
    throw DataError("'" + path.string() + "': unsupported index version " +
                    std::to_string(version));
  }
  IvfIndex index;
  index.dim = r.read_u32("dim");
  index.nlist = r.read_u32("nlist");
  if (index.dim == 0 || index.nlist == 0) {
    throw DataError("'" + path.string() + "': zero dim or nlist");
  }
  index.centroids.resize(static_cast<std::size_t>(index.nlist) * index.dim);
  r.read_f32_into(index.centroids, "centroids");
  index.list_ids.resize(index.nlist);
  index.list_vectors.resize(index.nlist);
  std::unordered_set<uint64_t> seen;
  for (uint32_t c = 0; c < index.nlist; ++c) {
    const uint64_t len = r.read_u64("posting list length");
    index.list_ids[c].reserve(len);
    index.list_vectors[c].resize(len * static_cast<std::size_t>(index.dim));
    for (uint64_t i = 0; i < len; ++i) {
      const uint64_t id = r.read_u64("posting customer id");
      if (!seen.insert(id).second) {
        throw DataError("'" + path.string() + "': duplicate customer id " +
                        std::to_string(id) + " at offset " + std::to_string(r.offset()));
      }
      index.list_ids[c].push_back(id);
      const std::span<float> v{index.list_vectors[c].data() + i * index.dim, index.dim};
      r.read_f32_into(v, "posting vector");
      const double norm = norm_f32(v);
      if (std::abs(norm - 1.0) > 1e-4) {
        throw DataError("'" + path.string() + "': stored vector for customer " +
                        std::to_string(id) + " has norm " + std::to_string(norm) +
                        ", expected 1 (corrupt file?)");
      }
    }
  }
  if (!r.at_eof()) {
    throw DataError("'" + path.string() + "': trailing bytes at offset " +
                    std::to_string(r.offset()));
  }
  return index;
}

} // namespace lookalike
