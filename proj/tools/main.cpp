#include "lookalike/ann_index.hpp"
#include "lookalike/customer_data.hpp"
#include "lookalike/errors.hpp"
#include "lookalike/features.hpp"
#include "lookalike/model.hpp"
#include "lookalike/pipeline.hpp"
#include "lookalike/similarity.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace lookalike;

TimeWindow parse_window(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("window must be start:end, got '" + text + "'");
  }
  TimeWindow window{};
  try {
    window.start_day = std::stoi(text.substr(0, colon));
    window.end_day = std::stoi(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("window must be start:end with integer days, got '" + text + "'");
  }
  if (window.end_day <= window.start_day) {
    throw std::invalid_argument("window end must be after start, got '" + text + "'");
  }
  return window;
}

std::vector<AttributeFilter> parse_filters(const std::vector<std::string>& specs) {
  std::vector<AttributeFilter> filters;
  for (const std::string& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size()) {
      throw std::invalid_argument("filter must be field=value[|value...], got '" + spec + "'");
    }
    AttributeFilter filter;
    filter.field = spec.substr(0, eq);
    std::string values = spec.substr(eq + 1);
    std::size_t start = 0;
    while (true) {
      const auto bar = values.find('|', start);
      const std::string value = values.substr(start, bar - start);
      if (value.empty()) {
        throw std::invalid_argument("filter '" + spec + "' has an empty value");
      }
      filter.allowed.push_back(value);
      if (bar == std::string::npos) break;
      start = bar + 1;
    }
    filters.push_back(std::move(filter));
  }
  return filters;
}

std::vector<uint64_t> read_seed_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open seed file '" + path.string() + "'");
  std::vector<uint64_t> seeds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      const uint64_t id = std::stoull(line, &used);
      if (used != line.size()) throw std::invalid_argument("trailing characters");
      seeds.push_back(id);
    } catch (const std::exception&) {
      throw DataError("'" + path.string() + "' line " + std::to_string(line_no) +
                      ": '" + line + "' is not a customer id");
    }
  }
  return seeds;
}

void write_text(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + out_path + "' for writing");
  out << text;
  if (!out) throw DataError("failed writing '" + out_path + "'");
}

SimilarityMetric make_metric(const std::string& metric_name, const std::string& channel_name) {
  const auto kind = metric_from_string(metric_name);
  const auto channel = channel_from_string(channel_name);
  if (!kind) throw std::invalid_argument("unknown metric '" + metric_name + "'");
  if (!channel) throw std::invalid_argument("unknown channel '" + channel_name + "'");
  return {*kind, *channel};
}

/// Loads the word-vector table and wraps it for featurization; returns the
/// table dimension through loc_dim.
std::shared_ptr<const TextEncoder> make_encoder(const std::string& path, uint32_t& loc_dim) {
  WordVectorTable table = load_word_vectors(path);
  loc_dim = table.dimension;
  return std::make_shared<WordAveragingEncoder>(std::move(table));
}

struct GenDataOpts {
  std::string out;
  uint64_t customers = 1000;
  uint32_t categories = 20;
  uint32_t archetypes = 8;
  std::string days = "0:360";
  double mean_events = 40.0;
  bool location_informative = true;
  uint32_t word_dim = 16;
  std::string word_vectors;
};

int run_gen_data(const GenDataOpts& opts, uint64_t seed) {
  SynthConfig config;
  config.n_customers = opts.customers;
  config.n_categories = opts.categories;
  config.n_archetypes = opts.archetypes;
  config.day_range = parse_window(opts.days);
  config.location_informative = opts.location_informative;
  config.rng_seed = seed;
  config.mean_events = opts.mean_events;

  const std::vector<CustomerRecord> records = generate_synthetic(config);
  save_customers(records, opts.out);
  std::cout << "wrote " << records.size() << " customers to " << opts.out << "\n";

  if (opts.word_dim > 0) {
    const WordVectorTable table = synthesize_location_vectors(records, opts.word_dim, seed);
    std::filesystem::path wv_path = opts.word_vectors.empty()
        ? std::filesystem::path(opts.out).parent_path() / "word_vectors.txt"
        : std::filesystem::path(opts.word_vectors);
    save_word_vectors(table, wv_path);
    std::cout << "wrote " << table.entries.size() << " word vectors (dim "
              << table.dimension << ") to " << wv_path.string() << "\n";
  }
  return 0;
}

struct TrainOpts {
  std::string universe;
  std::string out = "model.lkem";
  std::size_t pairs = 10000;
  std::size_t val_pairs = 1000;
  std::size_t test_pairs = 2000;
  std::string metric = "cosine";
  std::string channel = "transaction";
  std::string train_window = "0:270";
  std::string val_window = "270:315";
  std::string test_window = "315:360";
  uint32_t epochs = 10;
  uint32_t batch_size = 256;
  double learning_rate = 1e-3;
  uint32_t embedding_dim = 128;
  std::vector<uint32_t> hidden = {256, 128};
  std::string word_vectors;
};

int run_train(const TrainOpts& opts, uint64_t seed) {
  const std::vector<CustomerRecord> records = load_customers(opts.universe);
  const uint32_t n_categories = infer_category_count(records);
  const SimilarityMetric metric = make_metric(opts.metric, opts.channel);

  const auto train_pairs = make_training_pairs(records, metric, parse_window(opts.train_window),
                                               opts.pairs, seed, n_categories);
  const auto val_pairs = make_training_pairs(records, metric, parse_window(opts.val_window),
                                             opts.val_pairs, seed + 1, n_categories);
  const auto test_pairs = make_training_pairs(records, metric, parse_window(opts.test_window),
                                              opts.test_pairs, seed + 2, n_categories);

  FeatureContext context;
  uint32_t loc_dim = 0;
  if (!opts.word_vectors.empty()) context.encoder = make_encoder(opts.word_vectors, loc_dim);
  context.schema = infer_schema(records, loc_dim);
  context.stats = fit_normalizer(records, context.schema);

  TrainConfig config;
  config.embedding_dim = opts.embedding_dim;
  config.hidden_dims = opts.hidden;
  config.learning_rate = opts.learning_rate;
  config.batch_size = opts.batch_size;
  config.epochs = opts.epochs;
  config.rng_seed = seed;

  std::cout << "training on " << train_pairs.size() << " pairs ("
            << records.size() << " customers, input width "
            << context.schema.total_width() << ")\n";
  auto [params, report] = train_model(records, train_pairs, val_pairs, test_pairs,
                                      context, config);
  for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
    std::printf("epoch %zu  train loss %.6f  val mae %.6f\n", e + 1,
                report.train_loss[e], report.val_mae[e]);
  }
  std::printf("test mae %.6f\n", report.test_mae);

  save_model(params, context.schema, context.stats, opts.out);
  std::cout << "wrote model to " << opts.out << "\n";
  return 0;
}

struct OfflineOpts {
  std::string universe;
  std::string model;
  std::string out_dir;
  uint32_t nlist = 0;
  std::string word_vectors;
};

int run_offline(const OfflineOpts& opts, uint64_t seed, unsigned threads) {
  OfflineConfig config;
  config.nlist = opts.nlist;
  config.rng_seed = seed;
  config.threads = threads;
  config.word_vectors = opts.word_vectors;

  const OfflineReport report = offline_stage(opts.universe, opts.model, config, opts.out_dir);
  std::cout << "embedded and indexed " << report.indexed_count << " customers\n"
            << "wrote " << report.embedding_path.string() << "\n"
            << "wrote " << report.index_path.string() << "\n";
  if (!report.skipped_ids.empty()) {
    std::cerr << "skipped " << report.skipped_ids.size()
              << " customers with zero-norm embeddings:\n";
    for (uint64_t id : report.skipped_ids) std::cerr << "  " << id << "\n";
    return 4;
  }
  return 0;
}

struct ExpandOpts {
  std::string universe;
  std::string model;
  std::string index;
  std::string embeddings;
  std::string word_vectors;
  std::vector<uint64_t> seeds;
  std::string seeds_file;
  uint32_t k_per_seed = 100;
  uint32_t output_size = 1000;
  bool include_seeds = false;
  std::vector<std::string> filters;
  uint32_t nprobe = 0;
  std::string format = "json";
  std::string out;
  bool emit_timing = false;
};

int run_expand(const ExpandOpts& opts) {
  ExpansionRequest request;
  request.seed_ids = opts.seeds;
  if (!opts.seeds_file.empty()) {
    const auto from_file = read_seed_file(opts.seeds_file);
    request.seed_ids.insert(request.seed_ids.end(), from_file.begin(), from_file.end());
  }
  if (request.seed_ids.empty()) {
    throw std::invalid_argument("no seed customers given; use --seeds or --seeds-file");
  }
  request.k_per_seed = opts.k_per_seed;
  request.output_size = opts.output_size;
  request.exclude_seeds = !opts.include_seeds;
  request.attribute_filters = parse_filters(opts.filters);
  request.nprobe = opts.nprobe;

  const std::vector<CustomerRecord> universe = load_customers(opts.universe);
  const EmbeddingMatrix embeddings = load_embeddings(opts.embeddings);
  const IvfIndex index = load_index(opts.index);

  std::optional<LoadedModel> model;
  FeatureContext context;
  ModelHandle handle;
  if (!opts.model.empty()) {
    model = load_model(opts.model);
    context.schema = model->schema;
    context.stats = model->stats;
    if (model->schema.location_dim > 0) {
      if (opts.word_vectors.empty()) {
        throw DataError("model embeds location text; pass --word-vectors");
      }
      uint32_t loc_dim = 0;
      context.encoder = make_encoder(opts.word_vectors, loc_dim);
      if (loc_dim != model->schema.location_dim) {
        throw DataError("word vectors have width " + std::to_string(loc_dim) +
                        ", model expects " + std::to_string(model->schema.location_dim));
      }
    }
    handle = {&model->params, &context};
  }

  ExpansionResult result = expand(request, index, embeddings, universe, handle);
  result.model_path = opts.model;
  result.index_path = opts.index;

  const std::string text = opts.format == "csv"
      ? expansion_to_csv(result)
      : expansion_to_json(result, opts.emit_timing);
  write_text(text, opts.out);
  if (!opts.out.empty()) {
    std::cout << "wrote " << result.entries.size() << " entries to " << opts.out << "\n";
  }
  return 0;
}

struct EvaluateOpts {
  std::string universe;
  std::string word_vectors;
  std::string metric = "cosine";
  std::string channel = "transaction";
  std::string train_window = "0:270";
  std::string val_window = "270:315";
  std::string test_window = "315:360";
  std::size_t train_pairs = 20000;
  std::size_t val_pairs = 2000;
  std::size_t test_pairs = 4000;
  uint64_t pair_seed = 7;
  std::vector<uint64_t> train_seeds = {1, 2, 3};
  uint32_t epochs = 5;
  uint32_t batch_size = 256;
  double learning_rate = 1e-3;
  uint32_t embedding_dim = 32;
  std::vector<uint32_t> hidden2 = {64, 32};
  std::vector<uint32_t> hidden3 = {64, 64, 32};
  std::string out;
};

int run_evaluate(const EvaluateOpts& opts) {
  const std::vector<CustomerRecord> records = load_customers(opts.universe);
  const WordVectorTable table = load_word_vectors(opts.word_vectors);

  ComparisonConfig config;
  config.metric = make_metric(opts.metric, opts.channel);
  config.train_window = parse_window(opts.train_window);
  config.val_window = parse_window(opts.val_window);
  config.test_window = parse_window(opts.test_window);
  config.train_pairs = opts.train_pairs;
  config.val_pairs = opts.val_pairs;
  config.test_pairs = opts.test_pairs;
  config.pair_seed = opts.pair_seed;
  config.train_seeds = opts.train_seeds;
  config.base.learning_rate = opts.learning_rate;
  config.base.batch_size = opts.batch_size;
  config.base.epochs = opts.epochs;
  config.base.embedding_dim = opts.embedding_dim;
  config.hidden_two = opts.hidden2;
  config.hidden_three = opts.hidden3;

  const ComparisonReport report = run_model_comparison(records, config, &table);

  std::printf("%-28s %12s %10s   per-seed MAE\n", "variant", "mean MAE", "vs base");
  for (const VariantResult& v : report.variants) {
    std::string seeds;
    for (double mae : v.seed_mae) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%s%.4f", seeds.empty() ? "" : " ", mae);
      seeds += buf;
    }
    std::printf("%-28s %12.6f %9.1f%%   %s\n", v.name.c_str(), v.mean_mae,
                v.relative_pct, seeds.c_str());
  }

  if (!opts.out.empty()) {
    std::string json_text = "{\n  \"variants\": [\n";
    for (std::size_t i = 0; i < report.variants.size(); ++i) {
      const VariantResult& v = report.variants[i];
      json_text += "    {\"name\": \"" + v.name + "\", \"mean_mae\": " +
                   std::to_string(v.mean_mae) + ", \"relative_pct\": " +
                   std::to_string(v.relative_pct) + "}";
      json_text += i + 1 < report.variants.size() ? ",\n" : "\n";
    }
    json_text += "  ]\n}\n";
    write_text(json_text, opts.out);
  }
  return 0;
}

int inspect_file(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError("cannot open '" + path.string() + "'");
  char magic[4] = {};
  probe.read(magic, 4);
  const std::string tag(magic, probe.gcount());
  probe.close();

  if (tag == "LKEM") {
    const LoadedModel model = load_model(path);
    std::cout << "model " << path << "\n";
    std::cout << "  input width " << model.params.input_dim() << ", embedding dim "
              << model.params.embedding_dim() << ", parameters "
              << model.params.parameter_count() << "\n";
    for (std::size_t l = 0; l < model.params.layers.size(); ++l) {
      const LayerParams& layer = model.params.layers[l];
      std::cout << "  layer " << l << ": " << layer.in_dim << " -> " << layer.out_dim
                << (l + 1 < model.params.layers.size() ? " relu" : " linear") << "\n";
    }
    std::size_t one_hot = 0;
    for (const auto& [name, vocab] : model.schema.categorical_fields) one_hot += vocab.size();
    std::cout << "  schema: " << model.schema.dense_fields.size() << " dense, "
              << model.schema.categorical_fields.size() << " categorical (" << one_hot
              << " one-hot columns), location dim " << model.schema.location_dim << "\n";
  } else if (tag == "LKEV") {
    const EmbeddingMatrix matrix = load_embeddings(path);
    std::cout << "embeddings " << path << "\n";
    std::cout << "  rows " << matrix.row_count() << ", dim " << matrix.dim << "\n";
  } else if (tag == "LKIX") {
    const IvfIndex index = load_index(path);
    std::size_t min_len = index.list_ids.empty() ? 0 : index.list_ids.front().size();
    std::size_t max_len = min_len;
    for (const auto& ids : index.list_ids) {
      min_len = std::min(min_len, ids.size());
      max_len = std::max(max_len, ids.size());
    }
    std::cout << "index " << path << "\n";
    std::cout << "  dim " << index.dim << ", nlist " << index.nlist << ", stored "
              << index.stored_count() << "\n";
    std::cout << "  list sizes: min " << min_len << ", max " << max_len << "\n";
  } else {
    std::ifstream in(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const ExpansionResult result = expansion_from_json(buffer.str());
    std::cout << "expansion " << path << "\n";
    std::cout << "  entries " << result.entries.size() << ", seeds "
              << result.request.seed_ids.size() << ", k_per_seed "
              << result.request.k_per_seed << ", nprobe " << result.request.nprobe
              << ", exclude_seeds " << (result.request.exclude_seeds ? "true" : "false")
              << "\n";
    if (!result.entries.empty()) {
      std::printf("  top: customer %llu score %.6f (seed %llu)\n",
                  static_cast<unsigned long long>(result.entries.front().customer_id),
                  result.entries.front().score,
                  static_cast<unsigned long long>(result.entries.front().best_seed_id));
    }
    if (!result.note.empty()) std::cout << "  note: " << result.note << "\n";
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"lookalike: audience expansion via two-tower embeddings and IVF search"};
  argv = app.ensure_utf8(argv);
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file (TOML-style key=value with [subcommand] sections)");

  uint64_t seed = 1;
  unsigned threads = 1;
  app.add_option("--seed", seed, "Seed for all randomized steps")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads for embedding the universe")
      ->check(CLI::Range(1u, 512u))
      ->capture_default_str();

  GenDataOpts gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic customer universe")->fallthrough();
  gen_cmd->add_option("--out", gen.out, "Output JSONL path")->required();
  gen_cmd->add_option("--customers", gen.customers, "Number of customers")->capture_default_str();
  gen_cmd->add_option("--categories", gen.categories, "Number of product categories")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--archetypes", gen.archetypes, "Number of behavioral archetypes")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--days", gen.days, "Event day range as start:end")->capture_default_str();
  gen_cmd->add_option("--mean-events", gen.mean_events, "Expected events per customer")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_flag("--location-informative,!--no-location-informative", gen.location_informative,
                    "Give each archetype its own city vocabulary")->capture_default_str();
  gen_cmd->add_option("--word-dim", gen.word_dim,
                      "Synthetic word-vector width (0 skips the word-vector file)")
      ->capture_default_str();
  gen_cmd->add_option("--word-vectors", gen.word_vectors,
                      "Word-vector output path (default: word_vectors.txt next to --out)");

  TrainOpts train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the two-tower embedding model")->fallthrough();
  train_cmd->add_option("--universe", train.universe, "Customer universe JSONL")->required();
  train_cmd->add_option("--out", train.out, "Model output path")->capture_default_str();
  train_cmd->add_option("--pairs", train.pairs, "Training pairs to sample")->capture_default_str();
  train_cmd->add_option("--val-pairs", train.val_pairs, "Validation pairs")->capture_default_str();
  train_cmd->add_option("--test-pairs", train.test_pairs, "Test pairs")->capture_default_str();
  train_cmd->add_option("--metric", train.metric, "Similarity target")
      ->check(CLI::IsMember({"cosine", "jaccard", "euclidean"}))->capture_default_str();
  train_cmd->add_option("--channel", train.channel, "Activity channel for targets")
      ->check(CLI::IsMember({"transaction", "visit", "engagement"}))->capture_default_str();
  train_cmd->add_option("--train-window", train.train_window, "Training day window start:end")
      ->capture_default_str();
  train_cmd->add_option("--val-window", train.val_window, "Validation day window")
      ->capture_default_str();
  train_cmd->add_option("--test-window", train.test_window, "Test day window")
      ->capture_default_str();
  train_cmd->add_option("--epochs", train.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", train.batch_size, "Mini-batch size")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--learning-rate", train.learning_rate, "Adam learning rate")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--embedding-dim", train.embedding_dim, "Embedding width")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--hidden", train.hidden, "Hidden layer widths, comma separated")
      ->delimiter(',')->capture_default_str();
  train_cmd->add_option("--word-vectors", train.word_vectors,
                        "Word-vector file; enables location features");

  OfflineOpts offline;
  CLI::App* offline_cmd =
      app.add_subcommand("offline", "Embed the universe and build the IVF index")->fallthrough();
  offline_cmd->add_option("--universe", offline.universe, "Customer universe JSONL")->required();
  offline_cmd->add_option("--model", offline.model, "Trained model file")->required();
  offline_cmd->add_option("--out-dir", offline.out_dir, "Artifact output directory")->required();
  offline_cmd->add_option("--nlist", offline.nlist, "IVF partitions (0 = ceil(sqrt(n)))")
      ->capture_default_str();
  offline_cmd->add_option("--word-vectors", offline.word_vectors,
                          "Word-vector file (required when the model uses location text)");

  ExpandOpts expand_opts;
  CLI::App* expand_cmd = app.add_subcommand("expand", "Expand seed customers into lookalikes")->fallthrough();
  expand_cmd->add_option("--universe", expand_opts.universe, "Customer universe JSONL")->required();
  expand_cmd->add_option("--model", expand_opts.model,
                         "Model file (used for seeds missing from --embeddings)");
  expand_cmd->add_option("--index", expand_opts.index, "IVF index file")->required();
  expand_cmd->add_option("--embeddings", expand_opts.embeddings, "Embedding file")->required();
  expand_cmd->add_option("--word-vectors", expand_opts.word_vectors,
                         "Word-vector file (required when the model uses location text)");
  expand_cmd->add_option("--seeds", expand_opts.seeds, "Seed customer ids, comma separated")
      ->delimiter(',');
  expand_cmd->add_option("--seeds-file", expand_opts.seeds_file, "File with one seed id per line");
  expand_cmd->add_option("--k-per-seed", expand_opts.k_per_seed, "Neighbors fetched per seed")
      ->check(CLI::PositiveNumber)->capture_default_str();
  expand_cmd->add_option("--output-size", expand_opts.output_size, "Entries kept after merging")
      ->check(CLI::PositiveNumber)->capture_default_str();
  expand_cmd->add_flag("--include-seeds", expand_opts.include_seeds,
                       "Keep seed customers in the output");
  expand_cmd->add_option("--filter", expand_opts.filters,
                         "Demographic filter field=value[|value...], repeatable");
  expand_cmd->add_option("--nprobe", expand_opts.nprobe, "IVF lists probed (0 = nlist/8)")
      ->capture_default_str();
  expand_cmd->add_option("--format", expand_opts.format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  expand_cmd->add_option("--out", expand_opts.out, "Output path (default stdout)");
  expand_cmd->add_flag("--emit-timing", expand_opts.emit_timing,
                       "Include elapsed_ms in JSON metadata (breaks byte-for-byte rerun identity)");

  EvaluateOpts eval;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "Compare model variants on identical pairs and seeds")->fallthrough();
  eval_cmd->add_option("--universe", eval.universe, "Customer universe JSONL")->required();
  eval_cmd->add_option("--word-vectors", eval.word_vectors, "Word-vector file")->required();
  eval_cmd->add_option("--metric", eval.metric, "Similarity target")
      ->check(CLI::IsMember({"cosine", "jaccard", "euclidean"}))->capture_default_str();
  eval_cmd->add_option("--channel", eval.channel, "Activity channel for targets")
      ->check(CLI::IsMember({"transaction", "visit", "engagement"}))->capture_default_str();
  eval_cmd->add_option("--train-window", eval.train_window, "Training day window")
      ->capture_default_str();
  eval_cmd->add_option("--val-window", eval.val_window, "Validation day window")
      ->capture_default_str();
  eval_cmd->add_option("--test-window", eval.test_window, "Test day window")
      ->capture_default_str();
  eval_cmd->add_option("--train-pairs", eval.train_pairs, "Training pairs")->capture_default_str();
  eval_cmd->add_option("--val-pairs", eval.val_pairs, "Validation pairs")->capture_default_str();
  eval_cmd->add_option("--test-pairs", eval.test_pairs, "Test pairs")->capture_default_str();
  eval_cmd->add_option("--pair-seed", eval.pair_seed, "Seed for pair sampling")
      ->capture_default_str();
  eval_cmd->add_option("--train-seeds", eval.train_seeds, "Training seeds, comma separated")
      ->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--epochs", eval.epochs, "Training epochs")->capture_default_str();
  eval_cmd->add_option("--batch-size", eval.batch_size, "Mini-batch size")
      ->check(CLI::PositiveNumber)->capture_default_str();
  eval_cmd->add_option("--learning-rate", eval.learning_rate, "Adam learning rate")
      ->check(CLI::PositiveNumber)->capture_default_str();
  eval_cmd->add_option("--embedding-dim", eval.embedding_dim, "Embedding width")
      ->check(CLI::PositiveNumber)->capture_default_str();
  eval_cmd->add_option("--hidden2", eval.hidden2, "2-layer variant widths")
      ->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--hidden3", eval.hidden3, "3-layer variant widths")
      ->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Optional JSON report path");

  std::vector<std::string> inspect_files;
  bool inspect_defaults = false;
  CLI::App* inspect_cmd =
      app.add_subcommand("inspect", "Print file headers or every config default")->fallthrough();
  inspect_cmd->add_option("files", inspect_files, "Model, embedding, index, or expansion files");
  inspect_cmd->add_flag("--defaults", inspect_defaults, "Print every configurable default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(gen_cmd)) return run_gen_data(gen, seed);
    if (app.got_subcommand(train_cmd)) return run_train(train, seed);
    if (app.got_subcommand(offline_cmd)) return run_offline(offline, seed, threads);
    if (app.got_subcommand(expand_cmd)) return run_expand(expand_opts);
    if (app.got_subcommand(eval_cmd)) return run_evaluate(eval);
    if (app.got_subcommand(inspect_cmd)) {
      if (inspect_defaults) {
        std::cout << app.config_to_str(true, true);
        return 0;
      }
      if (inspect_files.empty()) {
        throw std::invalid_argument("inspect needs file arguments or --defaults");
      }
      for (const std::string& file : inspect_files) inspect_file(file);
      return 0;
    }
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
