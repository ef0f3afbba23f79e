#include "lookalike/pipeline.hpp"

#include "lookalike/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace lookalike {

using nlohmann::json;

namespace {

constexpr double kNormFloor = 1e-12;

bool passes_filters(const CustomerRecord* record,
                    const std::vector<AttributeFilter>& filters) {
  if (filters.empty()) return true;
  if (record == nullptr) return false;
  for (const AttributeFilter& f : filters) {
    const auto it = record->demographics.find(f.field);
    if (it == record->demographics.end()) return false;
    if (std::find(f.allowed.begin(), f.allowed.end(), it->second) == f.allowed.end()) {
      return false;
    }
  }
  return true;
}

std::vector<float> to_f32(std::span<const double> v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

double norm_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

json request_to_json(const ExpansionRequest& request) {
  json j;
  j["seed_ids"] = request.seed_ids;
  j["k_per_seed"] = request.k_per_seed;
  j["output_size"] = request.output_size;
  j["exclude_seeds"] = request.exclude_seeds;
  json filters = json::array();
  for (const AttributeFilter& f : request.attribute_filters) {
    json jf;
    jf["field"] = f.field;
    jf["allowed"] = f.allowed;
    filters.push_back(std::move(jf));
  }
  j["attribute_filters"] = std::move(filters);
  j["nprobe"] = request.nprobe;
  return j;
}

ExpansionRequest request_from_json(const json& j) {
  ExpansionRequest request;
  request.seed_ids = j.at("seed_ids").get<std::vector<uint64_t>>();
  request.k_per_seed = j.at("k_per_seed").get<uint32_t>();
  request.output_size = j.at("output_size").get<uint32_t>();
  request.exclude_seeds = j.at("exclude_seeds").get<bool>();
  for (const json& jf : j.at("attribute_filters")) {
    request.attribute_filters.push_back(
        {jf.at("field").get<std::string>(),
         jf.at("allowed").get<std::vector<std::string>>()});
  }
  request.nprobe = j.at("nprobe").get<uint32_t>();
  return request;
}

} // namespace

ExpansionResult expand(const ExpansionRequest& request, const IvfIndex& index,
                       const EmbeddingMatrix& embeddings,
                       std::span<const CustomerRecord> universe,
                       const ModelHandle& model) {
  const auto started = std::chrono::steady_clock::now();

  if (request.seed_ids.empty()) throw DataError("expansion request has no seed ids");
  if (request.k_per_seed == 0) throw std::invalid_argument("k_per_seed must be positive");
  if (request.output_size == 0) throw std::invalid_argument("output_size must be positive");
  {
    std::unordered_set<uint64_t> seen;
    for (uint64_t id : request.seed_ids) {
      if (!seen.insert(id).second) {
        throw DataError("duplicate seed id " + std::to_string(id));
      }
    }
  }

  std::unordered_map<uint64_t, std::size_t> row_of;
  row_of.reserve(embeddings.row_count());
  for (std::size_t i = 0; i < embeddings.row_count(); ++i) {
    row_of.emplace(embeddings.ids[i], i);
  }
  std::unordered_map<uint64_t, const CustomerRecord*> record_of;
  record_of.reserve(universe.size());
  for (const CustomerRecord& rec : universe) record_of.emplace(rec.customer_id, &rec);

  const uint32_t nprobe =
      request.nprobe == 0 ? default_nprobe(index.nlist) : request.nprobe;
  const std::size_t k_search = static_cast<std::size_t>(request.k_per_seed) +
                               request.seed_ids.size();

  struct Best {
    double score;
    uint64_t seed_id;
  };
  std::unordered_map<uint64_t, Best> merged;
  std::size_t total_hits = 0;

  for (uint64_t seed_id : request.seed_ids) {
    std::vector<float> query;
    if (const auto it = row_of.find(seed_id); it != row_of.end()) {
      const std::span<const float> r = embeddings.row(it->second);
      query.assign(r.begin(), r.end());
    } else if (const auto rec = record_of.find(seed_id); rec != record_of.end()) {
      if (model.params == nullptr || model.context == nullptr) {
        throw DataError("seed " + std::to_string(seed_id) +
                        " has no stored embedding and no model is loaded");
      }
      query = to_f32(forward(*model.params, model.context->extract(*rec->second)));
    } else {
      throw DataError("unknown seed id " + std::to_string(seed_id));
    }

    const std::vector<SearchHit> hits = search(index, query, k_search, nprobe);
    total_hits += hits.size();
    for (const SearchHit& hit : hits) {
      const auto [it, inserted] = merged.try_emplace(hit.customer_id,
                                                     Best{hit.score, seed_id});
      if (!inserted) {
        Best& best = it->second;
        if (hit.score > best.score ||
            (hit.score == best.score && seed_id < best.seed_id)) {
          best = {hit.score, seed_id};
        }
      }
    }
  }

  const std::unordered_set<uint64_t> seed_set(request.seed_ids.begin(),
                                              request.seed_ids.end());
  ExpansionResult result;
  result.request = request;
  result.request.nprobe = nprobe;
  result.entries.reserve(merged.size());
  for (const auto& [id, best] : merged) {
    if (request.exclude_seeds && seed_set.contains(id)) continue;
    const auto rec = record_of.find(id);
    if (!passes_filters(rec == record_of.end() ? nullptr : rec->second,
                        request.attribute_filters)) {
      continue;
    }
    result.entries.push_back({id, best.score, best.seed_id});
  }
  std::sort(result.entries.begin(), result.entries.end(),
            [](const ExpansionEntry& a, const ExpansionEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.customer_id < b.customer_id;
            });
  if (result.entries.size() > request.output_size) {
    result.entries.resize(request.output_size);
  }

  if (result.entries.empty()) {
    result.note = total_hits == 0
                      ? "searches returned no candidates"
                      : "all " + std::to_string(merged.size()) +
                            " candidates removed by seed exclusion or filters";
  }

  const auto elapsed = std::chrono::steady_clock::now() - started;
  result.elapsed_ms =
      std::chrono::duration<double, std::milli>(elapsed).count();
  return result;
}

OfflineReport offline_stage(const std::filesystem::path& universe_path,
                            const std::filesystem::path& model_path,
                            const OfflineConfig& config,
                            const std::filesystem::path& out_dir) {
  const LoadedModel model = load_model(model_path);
  const std::vector<CustomerRecord> universe = load_customers(universe_path);
  if (universe.empty()) throw DataError("'" + universe_path.string() + "' has no customers");

  FeatureContext context;
  context.schema = model.schema;
  context.stats = model.stats;
  if (model.schema.location_dim > 0) {
    if (config.word_vectors.empty()) {
      throw DataError("model embeds location text (width " +
                      std::to_string(model.schema.location_dim) +
                      ") but no word-vector file was configured");
    }
    WordVectorTable table = load_word_vectors(config.word_vectors);
    if (table.dimension != model.schema.location_dim) {
      throw DataError("word vectors in '" + config.word_vectors.string() +
                      "' have width " + std::to_string(table.dimension) +
                      ", model expects " + std::to_string(model.schema.location_dim));
    }
    context.encoder = std::make_shared<WordAveragingEncoder>(std::move(table));
  }

  const auto rows = embed_all(model.params, universe, context, config.threads);

  OfflineReport report;
  EmbeddingMatrix matrix;
  matrix.dim = model.params.embedding_dim();
  for (const auto& [id, vec] : rows) {
    std::vector<float> row = to_f32(vec);
    if (norm_of(row) < kNormFloor) {
      report.skipped_ids.push_back(id);
      continue;
    }
    matrix.append(id, row);
  }
  if (matrix.row_count() == 0) {
    throw DataError("every customer embedding had zero norm; nothing to index");
  }

  uint32_t nlist = config.nlist == 0 ? default_nlist(matrix.row_count()) : config.nlist;
  if (nlist > matrix.row_count()) {
    throw DataError("nlist " + std::to_string(nlist) + " exceeds indexed customer count " +
                    std::to_string(matrix.row_count()));
  }

  std::filesystem::create_directories(out_dir);
  report.embedding_path = out_dir / "embeddings.lkev";
  report.index_path = out_dir / "index.lkix";
  save_embeddings(matrix, report.embedding_path);
  const IvfIndex index = build_ivf(matrix, nlist, config.rng_seed);
  save_index(index, report.index_path);
  report.indexed_count = matrix.row_count();

  std::ofstream skip_file(out_dir / "skipped_ids.txt", std::ios::trunc);
  if (!skip_file) throw DataError("cannot write skip report in '" + out_dir.string() + "'");
  for (uint64_t id : report.skipped_ids) skip_file << id << '\n';
  skip_file.close();
  return report;
}

ComparisonReport run_model_comparison(std::span<const CustomerRecord> records,
                                      const ComparisonConfig& config,
                                      const WordVectorTable* word_vectors) {
  if (word_vectors == nullptr) {
    throw std::invalid_argument("model comparison needs word vectors for the location variants");
  }
  if (config.train_seeds.empty()) {
    throw std::invalid_argument("model comparison needs at least one training seed");
  }
  const uint32_t n_categories = infer_category_count(records);

  const std::vector<LabeledPair> train_pairs = make_training_pairs(
      records, config.metric, config.train_window, config.train_pairs,
      config.pair_seed, n_categories);
  const std::vector<LabeledPair> val_pairs = make_training_pairs(
      records, config.metric, config.val_window, config.val_pairs,
      config.pair_seed + 1, n_categories);
  const std::vector<LabeledPair> test_pairs = make_training_pairs(
      records, config.metric, config.test_window, config.test_pairs,
      config.pair_seed + 2, n_categories);

  const auto encoder = std::make_shared<WordAveragingEncoder>(*word_vectors);

  struct VariantSpec {
    std::string name;
    bool uses_location;
    const std::vector<uint32_t>* hidden;
  };
  const VariantSpec specs[] = {
      {"2 hidden layers", false, &config.hidden_two},
      {"2 hidden layers + location", true, &config.hidden_two},
      {"3 hidden layers", false, &config.hidden_three},
      {"3 hidden layers + location", true, &config.hidden_three},
  };

  ComparisonReport report;
  for (const VariantSpec& spec : specs) {
    FeatureContext context;
    context.schema = infer_schema(records, spec.uses_location ? word_vectors->dimension : 0);
    context.stats = fit_normalizer(records, context.schema);
    if (spec.uses_location) context.encoder = encoder;

    VariantResult variant;
    variant.name = spec.name;
    variant.uses_location = spec.uses_location;
    variant.hidden_layers = spec.hidden->size();
    for (uint64_t seed : config.train_seeds) {
      TrainConfig cfg = config.base;
      cfg.hidden_dims = *spec.hidden;
      cfg.rng_seed = seed;
      auto [params, train_report] =
          train_model(records, train_pairs, val_pairs, test_pairs, context, cfg);
      variant.seed_mae.push_back(train_report.test_mae);
    }
    double total = 0.0;
    for (double mae : variant.seed_mae) total += mae;
    variant.mean_mae = total / static_cast<double>(variant.seed_mae.size());
    report.variants.push_back(std::move(variant));
  }

  const double baseline = report.variants.front().mean_mae;
  for (VariantResult& variant : report.variants) {
    variant.relative_pct = baseline > 0.0 ? 100.0 * variant.mean_mae / baseline : 100.0;
  }
  return report;
}

std::string expansion_to_json(const ExpansionResult& result, bool include_timing) {
  json j;
  json entries = json::array();
  for (const ExpansionEntry& e : result.entries) {
    json je;
    je["customer_id"] = e.customer_id;
    je["score"] = e.score;
    je["best_seed_id"] = e.best_seed_id;
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  json meta;
  meta["model"] = result.model_path;
  meta["index"] = result.index_path;
  meta["request"] = request_to_json(result.request);
  if (include_timing) meta["elapsed_ms"] = result.elapsed_ms;
  if (!result.note.empty()) meta["note"] = result.note;
  j["metadata"] = std::move(meta);
  return j.dump(2) + "\n";
}

std::string expansion_to_csv(const ExpansionResult& result) {
  std::string out = "customer_id,score,best_seed_id\n";
  char buf[64];
  for (const ExpansionEntry& e : result.entries) {
    out += std::to_string(e.customer_id);
    out += ',';
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), e.score);
    out.append(buf, end);
    out += ',';
    out += std::to_string(e.best_seed_id);
    out += '\n';
  }
  return out;
}

ExpansionResult expansion_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid expansion JSON: ") + e.what());
  }
  ExpansionResult result;
  try {
    for (const json& je : j.at("entries")) {
      result.entries.push_back({je.at("customer_id").get<uint64_t>(),
                                je.at("score").get<double>(),
                                je.at("best_seed_id").get<uint64_t>()});
    }
    const json& meta = j.at("metadata");
    result.model_path = meta.at("model").get<std::string>();
    result.index_path = meta.at("index").get<std::string>();
    result.request = request_from_json(meta.at("request"));
    result.elapsed_ms = meta.value("elapsed_ms", 0.0);
    result.note = meta.value("note", std::string{});
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed expansion JSON: ") + e.what());
  }
  return result;
}

} // namespace lookalike
