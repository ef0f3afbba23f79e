#include "lookalike/features.hpp"

#include "lookalike/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace lookalike {

using nlohmann::json;

std::size_t FeatureSchema::total_width() const {
  std::size_t width = dense_fields.size();
  for (const auto& [name, vocab] : categorical_fields) width += vocab.size();
  return width + location_dim;
}

void save_schema(const FeatureSchema& schema, const std::filesystem::path& path) {
  json j;
  j["dense_fields"] = schema.dense_fields;
  json cats = json::array();
  for (const auto& [name, vocab] : schema.categorical_fields) {
    cats.push_back(json::array({name, vocab}));
  }
  j["categorical_fields"] = std::move(cats);
  j["location_dim"] = schema.location_dim;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

FeatureSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError("'" + path.string() + "': invalid JSON: " + e.what());
  }
  FeatureSchema schema;
  if (!j.contains("dense_fields") || !j["dense_fields"].is_array()) {
    throw DataError("'" + path.string() + "': missing 'dense_fields' array");
  }
  schema.dense_fields = j["dense_fields"].get<std::vector<std::string>>();
  if (!j.contains("categorical_fields") || !j["categorical_fields"].is_array()) {
    throw DataError("'" + path.string() + "': missing 'categorical_fields' array");
  }
  for (const auto& entry : j["categorical_fields"]) {
    if (!entry.is_array() || entry.size() != 2) {
      throw DataError("'" + path.string() + "': categorical field must be [name, vocabulary]");
    }
    schema.categorical_fields.emplace_back(
        entry[0].get<std::string>(), entry[1].get<std::vector<std::string>>());
  }
  schema.location_dim = j.value("location_dim", 0u);

  std::set<std::string> names(schema.dense_fields.begin(), schema.dense_fields.end());
  for (const auto& [name, vocab] : schema.categorical_fields) names.insert(name);
  if (names.size() != schema.dense_fields.size() + schema.categorical_fields.size()) {
    throw DataError("'" + path.string() + "': duplicate field names in schema");
  }
  return schema;
}

FeatureSchema infer_schema(std::span<const CustomerRecord> records,
                           uint32_t location_dim) {
  std::set<std::string> dense;
  std::map<std::string, std::set<std::string>> categorical;
  for (const auto& rec : records) {
    for (const auto& [name, _] : rec.dense_stats) dense.insert(name);
    for (const auto& [name, value] : rec.demographics) categorical[name].insert(value);
  }
  FeatureSchema schema;
  schema.dense_fields.assign(dense.begin(), dense.end());
  for (const auto& [name, values] : categorical) {
    schema.categorical_fields.emplace_back(
        name, std::vector<std::string>(values.begin(), values.end()));
  }
  schema.location_dim = location_dim;
  return schema;
}

FeatureStats fit_normalizer(std::span<const CustomerRecord> records,
                            const FeatureSchema& schema) {
  if (records.empty()) throw std::invalid_argument("fit_normalizer needs at least one record");
  const std::size_t d = schema.dense_fields.size();
  FeatureStats stats;
  stats.mean.assign(d, 0.0);
  stats.stddev.assign(d, 0.0);
  const double n = static_cast<double>(records.size());
  for (const auto& rec : records) {
    for (std::size_t f = 0; f < d; ++f) {
      auto it = rec.dense_stats.find(schema.dense_fields[f]);
      stats.mean[f] += it == rec.dense_stats.end() ? 0.0 : it->second;
    }
  }
  for (std::size_t f = 0; f < d; ++f) stats.mean[f] /= n;
  for (const auto& rec : records) {
    for (std::size_t f = 0; f < d; ++f) {
      auto it = rec.dense_stats.find(schema.dense_fields[f]);
      const double v = it == rec.dense_stats.end() ? 0.0 : it->second;
      const double delta = v - stats.mean[f];
      stats.stddev[f] += delta * delta;
    }
  }
  for (std::size_t f = 0; f < d; ++f) stats.stddev[f] = std::sqrt(stats.stddev[f] / n);
  return stats;
}

WordVectorTable load_word_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  WordVectorTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<float> vec;
    float value;
    while (ss >> value) vec.push_back(value);
    if (!ss.eof()) {
      ss.clear();
      std::string rest;
      ss >> rest;
      throw DataError("'" + path.string() + "' line " + std::to_string(line_no) +
                      ": '" + rest + "' is not a number");
    }
    if (token.empty() || vec.empty()) {
      throw DataError("'" + path.string() + "' line " + std::to_string(line_no) +
                      ": expected a token followed by vector components");
    }
    if (table.dimension == 0) {
      table.dimension = static_cast<uint32_t>(vec.size());
    } else if (vec.size() != table.dimension) {
      throw DataError("'" + path.string() + "' line " + std::to_string(line_no) +
                      ": dimension " + std::to_string(vec.size()) +
                      " does not match table dimension " +
                      std::to_string(table.dimension));
    }
    table.entries[token] = std::move(vec);
  }
  if (table.entries.empty()) {
    throw DataError("'" + path.string() + "': no word vectors found");
  }
  return table;
}

void save_word_vectors(const WordVectorTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  // Sorted token order keeps the file deterministic.
  std::vector<const std::string*> tokens;
  tokens.reserve(table.entries.size());
  for (const auto& [token, _] : table.entries) tokens.push_back(&token);
  std::sort(tokens.begin(), tokens.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  char buf[64];
  for (const std::string* token : tokens) {
    out << *token;
    for (float v : table.entries.at(*token)) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << ' ' << std::string_view(buf, end - buf);
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

namespace {

std::vector<std::string> tokenize_lower(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

} // namespace

std::vector<double> embed_location(std::string_view text, const WordVectorTable& table) {
  std::vector<double> sum(table.dimension, 0.0);
  std::size_t hits = 0;
  for (const auto& token : tokenize_lower(text)) {
    auto it = table.entries.find(token);
    if (it == table.entries.end()) continue;
    ++hits;
    for (uint32_t i = 0; i < table.dimension; ++i) sum[i] += it->second[i];
  }
  if (hits == 0) return sum; // zero vector fallback
  for (double& v : sum) v /= static_cast<double>(hits);
  return sum;
}

WordVectorTable synthesize_location_vectors(std::span<const CustomerRecord> records,
                                            uint32_t dimension, uint64_t rng_seed) {
  if (dimension == 0) throw std::invalid_argument("word vector dimension must be positive");
  std::set<std::string> vocab;
  for (const CustomerRecord& rec : records) {
    for (auto& token : tokenize_lower(rec.location_text)) {
      const bool alpha = std::all_of(token.begin(), token.end(), [](char c) {
        return std::isalpha(static_cast<unsigned char>(c));
      });
      if (alpha) vocab.insert(std::move(token));
    }
  }
  WordVectorTable table;
  table.dimension = dimension;
  for (const std::string& token : vocab) {
    // FNV-1a so a token's vector is a pure function of (token, seed).
    uint64_t h = 14695981039346656037ULL;
    for (char c : token) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    std::mt19937_64 rng(h ^ rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<float> vec(dimension);
    double norm_sq = 0.0;
    for (uint32_t i = 0; i < dimension; ++i) {
      const double v = gauss(rng);
      vec[i] = static_cast<float>(v);
      norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    if (norm > 0.0) {
      for (float& v : vec) v = static_cast<float>(v / norm);
    }
    table.entries.emplace(token, std::move(vec));
  }
  return table;
}

FeatureVector extract_features(const CustomerRecord& record,
                               const FeatureSchema& schema,
                               const FeatureStats& stats,
                               const TextEncoder* encoder) {
  if (schema.location_dim > 0) {
    if (encoder == nullptr) {
      throw std::invalid_argument("schema has location_dim > 0 but no text encoder given");
    }
    if (encoder->dimension() != schema.location_dim) {
      throw std::invalid_argument("text encoder dimension does not match schema location_dim");
    }
  }
  if (stats.mean.size() != schema.dense_fields.size()) {
    throw std::invalid_argument("feature stats do not match schema dense fields");
  }

  FeatureVector out;
  out.reserve(schema.total_width());
  for (std::size_t f = 0; f < schema.dense_fields.size(); ++f) {
    auto it = record.dense_stats.find(schema.dense_fields[f]);
    const double v = it == record.dense_stats.end() ? 0.0 : it->second;
    out.push_back(stats.stddev[f] > 0.0 ? (v - stats.mean[f]) / stats.stddev[f] : 0.0);
  }
  for (const auto& [name, vocab] : schema.categorical_fields) {
    auto it = record.demographics.find(name);
    std::size_t hot = vocab.size(); // out-of-vocabulary -> all-zero block
    if (it != record.demographics.end()) {
      auto pos = std::find(vocab.begin(), vocab.end(), it->second);
      if (pos != vocab.end()) hot = static_cast<std::size_t>(pos - vocab.begin());
    }
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      out.push_back(i == hot ? 1.0 : 0.0);
    }
  }
  if (schema.location_dim > 0) {
    auto loc = encoder->encode(record.location_text);
    out.insert(out.end(), loc.begin(), loc.end());
  }
  return out;
}

} // namespace lookalike
