#include "lookalike/similarity.hpp"

#include "lookalike/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_set>

namespace lookalike {

using nlohmann::json;

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Cosine: return "cosine";
    case MetricKind::Jaccard: return "jaccard";
    case MetricKind::EuclideanMapped: return "euclidean";
  }
  return "cosine";
}

std::optional<MetricKind> metric_from_string(std::string_view name) {
  if (name == "cosine") return MetricKind::Cosine;
  if (name == "jaccard") return MetricKind::Jaccard;
  if (name == "euclidean") return MetricKind::EuclideanMapped;
  return std::nullopt;
}

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("activity vectors differ in length: " +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
}

} // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  check_lengths(a, b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double jaccard_similarity(std::span<const double> a, std::span<const double> b) {
  check_lengths(a, b);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool in_a = a[i] > 0.0;
    const bool in_b = b[i] > 0.0;
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double euclidean_mapped_similarity(std::span<const double> a,
                                   std::span<const double> b) {
  check_lengths(a, b);
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return 1.0 / (1.0 + std::sqrt(sq));
}

double pair_target(const CustomerRecord& a, const CustomerRecord& b,
                   SimilarityMetric metric, TimeWindow window,
                   uint32_t n_categories) {
  const auto o_a = activity_vector(a, metric.channel, window, n_categories);
  const auto o_b = activity_vector(b, metric.channel, window, n_categories);
  switch (metric.kind) {
    case MetricKind::Cosine: return cosine_similarity(o_a, o_b);
    case MetricKind::Jaccard: return jaccard_similarity(o_a, o_b);
    case MetricKind::EuclideanMapped: return euclidean_mapped_similarity(o_a, o_b);
  }
  return 0.0;
}

namespace {

struct PairKey {
  uint64_t lo, hi;
  bool operator==(const PairKey&) const = default;
};

struct PairKeyHash {
  std::size_t operator()(const PairKey& k) const {
    uint64_t h = k.lo * 0x9e3779b97f4a7c15ull;
    h ^= k.hi + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

} // namespace

std::vector<LabeledPair> make_training_pairs(
    std::span<const CustomerRecord> records, SimilarityMetric metric,
    TimeWindow window, std::size_t n_pairs, uint64_t rng_seed,
    uint32_t n_categories) {
  const std::size_t n = records.size();
  if (n < 2) throw std::invalid_argument("need at least 2 records to form pairs");
  const unsigned __int128 max_pairs =
      static_cast<unsigned __int128>(n) * (n - 1) / 2;
  if (static_cast<unsigned __int128>(n_pairs) > max_pairs) {
    throw std::invalid_argument("n_pairs exceeds the number of distinct unordered pairs");
  }

  // Activity vectors are reused across every sampled pair.
  std::vector<CategoryActivityVector> activity(n);
  for (std::size_t i = 0; i < n; ++i) {
    activity[i] = activity_vector(records[i], metric.channel, window, n_categories);
  }

  // Per-category membership and total mass, for the anchored half.
  std::vector<std::vector<uint32_t>> members(n_categories);
  std::vector<double> category_mass(n_categories, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (uint32_t c = 0; c < n_categories; ++c) {
      if (activity[i][c] > 0.0) {
        members[c].push_back(static_cast<uint32_t>(i));
        category_mass[c] += activity[i][c];
      }
    }
  }
  std::vector<uint32_t> anchorable;
  std::vector<double> anchor_weights;
  for (uint32_t c = 0; c < n_categories; ++c) {
    if (members[c].size() >= 2) {
      anchorable.push_back(c);
      anchor_weights.push_back(category_mass[c]);
    }
  }

  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> idx_pick(0, n - 1);

  std::unordered_set<PairKey, PairKeyHash> used;
  used.reserve(n_pairs * 2);
  std::vector<std::pair<uint32_t, uint32_t>> sampled;
  sampled.reserve(n_pairs);

  auto try_add = [&](std::size_t i, std::size_t j) {
    if (i == j) return false;
    PairKey key{std::min<uint64_t>(i, j), std::max<uint64_t>(i, j)};
    if (!used.insert(key).second) return false;
    sampled.emplace_back(static_cast<uint32_t>(key.lo), static_cast<uint32_t>(key.hi));
    return true;
  };

  const std::size_t n_anchored = anchorable.empty() ? 0 : n_pairs / 2;
  std::size_t attempts = 0;
  const std::size_t max_attempts = 64 * n_pairs + 1024;

  if (n_anchored > 0) {
    std::discrete_distribution<std::size_t> cat_pick(anchor_weights.begin(),
                                                     anchor_weights.end());
    while (sampled.size() < n_anchored && attempts < max_attempts) {
      ++attempts;
      const auto& group = members[anchorable[cat_pick(rng)]];
      std::uniform_int_distribution<std::size_t> member_pick(0, group.size() - 1);
      const std::size_t i = group[member_pick(rng)];
      const std::size_t j = group[member_pick(rng)];
      try_add(i, j);
    }
  }
  while (sampled.size() < n_pairs && attempts < max_attempts) {
    ++attempts;
    const std::size_t i = idx_pick(rng);
    const std::size_t j = idx_pick(rng);
    try_add(i, j);
  }
  // Rejection sampling can stall when n_pairs approaches the number of
  // distinct pairs; finish by scanning pairs in index order.
  for (std::size_t i = 0; i < n && sampled.size() < n_pairs; ++i) {
    for (std::size_t j = i + 1; j < n && sampled.size() < n_pairs; ++j) {
      try_add(i, j);
    }
  }

  std::vector<LabeledPair> out;
  out.reserve(sampled.size());
  for (const auto& [i, j] : sampled) {
    double target = 0.0;
    switch (metric.kind) {
      case MetricKind::Cosine:
        target = cosine_similarity(activity[i], activity[j]);
        break;
      case MetricKind::Jaccard:
        target = jaccard_similarity(activity[i], activity[j]);
        break;
      case MetricKind::EuclideanMapped:
        target = euclidean_mapped_similarity(activity[i], activity[j]);
        break;
    }
    out.push_back({records[i].customer_id, records[j].customer_id, target});
  }
  return out;
}

void save_pairs(std::span<const LabeledPair> pairs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  for (const auto& p : pairs) {
    json j;
    j["id_a"] = p.id_a;
    j["id_b"] = p.id_b;
    j["target"] = p.target;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::vector<LabeledPair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<LabeledPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!j.contains("id_a") || !j.contains("id_b") || !j.contains("target")) {
      throw DataError("line " + std::to_string(line_no) +
                      ": pair needs id_a, id_b and target");
    }
    pairs.push_back({j["id_a"].get<uint64_t>(), j["id_b"].get<uint64_t>(),
                     j["target"].get<double>()});
  }
  return pairs;
}

} // namespace lookalike
