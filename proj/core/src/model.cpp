#include "lookalike/model.hpp"

#include "lookalike/binary_io.hpp"
#include "lookalike/errors.hpp"
#include "lookalike/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace lookalike {

using nlohmann::json;

namespace {

constexpr double kNormFloor = 1e-12;
constexpr uint32_t kModelVersion = 1;

/// A pair by reference into feature storage owned elsewhere.
struct PairRef {
  const double* x_a = nullptr;
  const double* x_b = nullptr;
  double target = 0.0;
};

/// Activations for one tower: acts[0] is the input, acts[L] the embedding.
using Activations = std::vector<std::vector<double>>;

void apply_layer(const LayerParams& layer, std::span<const double> in,
                 std::vector<double>& out, bool relu) {
  out.assign(layer.out_dim, 0.0);
  for (uint32_t i = 0; i < layer.out_dim; ++i) {
    const double* row = layer.weights.data() + static_cast<std::size_t>(i) * layer.in_dim;
    double z = layer.bias[i];
    for (uint32_t j = 0; j < layer.in_dim; ++j) z += row[j] * in[j];
    out[i] = relu && z < 0.0 ? 0.0 : z;
  }
}

Activations forward_cached(const MlpParams& params, std::span<const double> x) {
  Activations acts(params.layers.size() + 1);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const bool relu = l + 1 < params.layers.size();
    apply_layer(params.layers[l], acts[l], acts[l + 1], relu);
  }
  return acts;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

/// Cosine of two already computed embeddings under the zero-norm convention.
double embedding_cosine(std::span<const double> e_a, std::span<const double> e_b) {
  const double na = norm(e_a);
  const double nb = norm(e_b);
  if (na < kNormFloor || nb < kNormFloor) return 0.0;
  return dot(e_a, e_b) / (na * nb);
}

/// Backpropagates d(loss)/d(embedding) through one tower, accumulating the
/// shared parameter gradients. `acts` must come from forward_cached.
void backprop_tower(const MlpParams& params, const Activations& acts,
                    std::vector<double> grad_out, MlpParams& grads) {
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const LayerParams& layer = params.layers[l];
    LayerParams& g = grads.layers[l];
    const std::vector<double>& in = acts[l];
    for (uint32_t i = 0; i < layer.out_dim; ++i) {
      const double gi = grad_out[i];
      if (gi == 0.0) continue;
      double* grow = g.weights.data() + static_cast<std::size_t>(i) * layer.in_dim;
      for (uint32_t j = 0; j < layer.in_dim; ++j) grow[j] += gi * in[j];
      g.bias[i] += gi;
    }
    if (l == 0) break;
    std::vector<double> grad_in(layer.in_dim, 0.0);
    for (uint32_t i = 0; i < layer.out_dim; ++i) {
      const double gi = grad_out[i];
      if (gi == 0.0) continue;
      const double* row = layer.weights.data() + static_cast<std::size_t>(i) * layer.in_dim;
      for (uint32_t j = 0; j < layer.in_dim; ++j) grad_in[j] += gi * row[j];
    }
    // Hidden activations are post-ReLU, so a zero activation means the unit
    // was clipped (or sat exactly at the kink, where the subgradient is 0).
    for (uint32_t j = 0; j < layer.in_dim; ++j) {
      if (acts[l][j] <= 0.0) grad_in[j] = 0.0;
    }
    grad_out = std::move(grad_in);
  }
}

BackwardResult backward_refs(const MlpParams& params, std::span<const PairRef> batch) {
  if (params.layers.empty()) throw std::invalid_argument("model has no layers");
  BackwardResult result;
  result.gradients = zeros_like(params);
  if (batch.empty()) return result;

  const uint32_t in_dim = params.input_dim();
  const uint32_t emb_dim = params.embedding_dim();
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (const PairRef& pair : batch) {
    const Activations acts_a = forward_cached(params, {pair.x_a, in_dim});
    const Activations acts_b = forward_cached(params, {pair.x_b, in_dim});
    const std::vector<double>& e_a = acts_a.back();
    const std::vector<double>& e_b = acts_b.back();

    const double na = norm(e_a);
    const double nb = norm(e_b);
    if (na < kNormFloor || nb < kNormFloor) {
      // Degenerate embedding: the prediction is pinned at 0, so the pair
      // still contributes loss but no gradient.
      result.loss += l1_loss(0.0, pair.target) * inv_n;
      continue;
    }

    const double pred = dot(e_a, e_b) / (na * nb);
    const double err = pred - pair.target;
    result.loss += (err >= 0.0 ? err : -err) * inv_n;
    const double s = err > 0.0 ? inv_n : (err < 0.0 ? -inv_n : 0.0);
    if (s == 0.0) continue;

    std::vector<double> de_a(emb_dim);
    std::vector<double> de_b(emb_dim);
    const double cross = 1.0 / (na * nb);
    const double self_a = pred / (na * na);
    const double self_b = pred / (nb * nb);
    for (uint32_t i = 0; i < emb_dim; ++i) {
      de_a[i] = s * (e_b[i] * cross - e_a[i] * self_a);
      de_b[i] = s * (e_a[i] * cross - e_b[i] * self_b);
    }
    backprop_tower(params, acts_a, std::move(de_a), result.gradients);
    backprop_tower(params, acts_b, std::move(de_b), result.gradients);
  }
  return result;
}

double batch_loss_refs(const MlpParams& params, std::span<const PairRef> batch) {
  if (batch.empty()) return 0.0;
  const uint32_t in_dim = params.input_dim();
  double total = 0.0;
  for (const PairRef& pair : batch) {
    const std::vector<double> e_a = forward(params, {pair.x_a, in_dim});
    const std::vector<double> e_b = forward(params, {pair.x_b, in_dim});
    total += l1_loss(embedding_cosine(e_a, e_b), pair.target);
  }
  return total / static_cast<double>(batch.size());
}

std::vector<PairRef> make_refs(std::span<const LabeledPair> pairs,
                               const FeatureMap& features) {
  std::vector<PairRef> refs;
  refs.reserve(pairs.size());
  for (const LabeledPair& p : pairs) {
    const auto it_a = features.find(p.id_a);
    const auto it_b = features.find(p.id_b);
    if (it_a == features.end() || it_b == features.end()) {
      const uint64_t missing = it_a == features.end() ? p.id_a : p.id_b;
      throw DataError("pair references unknown customer " + std::to_string(missing));
    }
    refs.push_back({it_a->second.data(), it_b->second.data(), p.target});
  }
  return refs;
}

double mae_over_refs(const MlpParams& params, std::span<const PairRef> refs) {
  if (refs.empty()) return std::numeric_limits<double>::quiet_NaN();
  const uint32_t in_dim = params.input_dim();
  double total = 0.0;
  for (const PairRef& pair : refs) {
    const std::vector<double> e_a = forward(params, {pair.x_a, in_dim});
    const std::vector<double> e_b = forward(params, {pair.x_b, in_dim});
    total += l1_loss(embedding_cosine(e_a, e_b), pair.target);
  }
  return total / static_cast<double>(refs.size());
}

void check_feature_width(const MlpParams& params, const FeatureContext& context) {
  if (params.input_dim() != context.schema.total_width()) {
    throw std::invalid_argument(
        "model expects input width " + std::to_string(params.input_dim()) +
        " but feature schema produces " + std::to_string(context.schema.total_width()));
  }
}

json schema_to_json(const FeatureSchema& schema) {
  json j;
  j["dense_fields"] = schema.dense_fields;
  json cats = json::array();
  for (const auto& [name, vocab] : schema.categorical_fields) {
    cats.push_back(json::array({name, vocab}));
  }
  j["categorical_fields"] = std::move(cats);
  j["location_dim"] = schema.location_dim;
  return j;
}

FeatureSchema schema_from_json(const json& j, const std::string& where) {
  FeatureSchema schema;
  if (!j.contains("dense_fields") || !j["dense_fields"].is_array()) {
    throw DataError(where + ": missing 'dense_fields' array in schema");
  }
  schema.dense_fields = j["dense_fields"].get<std::vector<std::string>>();
  if (!j.contains("categorical_fields") || !j["categorical_fields"].is_array()) {
    throw DataError(where + ": missing 'categorical_fields' array in schema");
  }
  for (const auto& entry : j["categorical_fields"]) {
    if (!entry.is_array() || entry.size() != 2) {
      throw DataError(where + ": categorical field must be [name, vocabulary]");
    }
    schema.categorical_fields.emplace_back(
        entry[0].get<std::string>(), entry[1].get<std::vector<std::string>>());
  }
  schema.location_dim = j.value("location_dim", 0u);
  return schema;
}

} // namespace

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const LayerParams& layer : layers) n += layer.weights.size() + layer.bias.size();
  return n;
}

MlpParams init_params(uint32_t input_dim, const TrainConfig& config) {
  if (input_dim == 0) throw std::invalid_argument("input_dim must be positive");
  if (config.embedding_dim == 0) throw std::invalid_argument("embedding_dim must be positive");
  for (uint32_t h : config.hidden_dims) {
    if (h == 0) throw std::invalid_argument("hidden layer widths must be positive");
  }

  std::vector<uint32_t> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  dims.push_back(config.embedding_dim);

  std::mt19937_64 rng(config.rng_seed);
  MlpParams params;
  params.layers.resize(dims.size() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LayerParams& layer = params.layers[l];
    layer.in_dim = dims[l];
    layer.out_dim = dims[l + 1];
    const double bound = std::sqrt(6.0 / (static_cast<double>(layer.in_dim) +
                                          static_cast<double>(layer.out_dim)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    layer.weights.resize(static_cast<std::size_t>(layer.out_dim) * layer.in_dim);
    for (double& w : layer.weights) w = dist(rng);
    layer.bias.assign(layer.out_dim, 0.0);
  }
  return params;
}

MlpParams zeros_like(const MlpParams& params) {
  MlpParams z;
  z.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    z.layers[l].in_dim = params.layers[l].in_dim;
    z.layers[l].out_dim = params.layers[l].out_dim;
    z.layers[l].weights.assign(params.layers[l].weights.size(), 0.0);
    z.layers[l].bias.assign(params.layers[l].bias.size(), 0.0);
  }
  return z;
}

std::vector<double> forward(const MlpParams& params, std::span<const double> x) {
  if (params.layers.empty()) throw std::invalid_argument("model has no layers");
  if (x.size() != params.input_dim()) {
    throw std::invalid_argument("input has width " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(params.input_dim()));
  }
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const bool relu = l + 1 < params.layers.size();
    apply_layer(params.layers[l], cur, next, relu);
    cur.swap(next);
  }
  return cur;
}

double predict_similarity(const MlpParams& params, std::span<const double> x_a,
                          std::span<const double> x_b) {
  const std::vector<double> e_a = forward(params, x_a);
  const std::vector<double> e_b = forward(params, x_b);
  return embedding_cosine(e_a, e_b);
}

BackwardResult backward(const MlpParams& params, std::span<const PairExample> batch) {
  std::vector<PairRef> refs;
  refs.reserve(batch.size());
  for (const PairExample& ex : batch) {
    if (ex.x_a.size() != params.input_dim() || ex.x_b.size() != params.input_dim()) {
      throw std::invalid_argument("pair feature width does not match model input");
    }
    refs.push_back({ex.x_a.data(), ex.x_b.data(), ex.target});
  }
  return backward_refs(params, refs);
}

double batch_loss(const MlpParams& params, std::span<const PairExample> batch) {
  std::vector<PairRef> refs;
  refs.reserve(batch.size());
  for (const PairExample& ex : batch) refs.push_back({ex.x_a.data(), ex.x_b.data(), ex.target});
  return batch_loss_refs(params, refs);
}

double mean_absolute_error(std::span<const double> preds,
                           std::span<const double> targets) {
  if (preds.size() != targets.size()) {
    throw std::invalid_argument("prediction and target counts differ");
  }
  if (preds.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) total += l1_loss(preds[i], targets[i]);
  return total / static_cast<double>(preds.size());
}

FeatureMap build_feature_map(std::span<const CustomerRecord> records,
                             const FeatureContext& context) {
  FeatureMap map;
  map.reserve(records.size());
  for (const CustomerRecord& rec : records) {
    auto [it, inserted] = map.emplace(rec.customer_id, context.extract(rec));
    if (!inserted) {
      throw DataError("duplicate customer id " + std::to_string(rec.customer_id));
    }
  }
  return map;
}

double evaluate_mae(const MlpParams& params, std::span<const LabeledPair> pairs,
                    const FeatureMap& features) {
  const std::vector<PairRef> refs = make_refs(pairs, features);
  return mae_over_refs(params, refs);
}

std::pair<MlpParams, TrainReport> train_model(
    std::span<const CustomerRecord> records,
    std::span<const LabeledPair> train_pairs,
    std::span<const LabeledPair> val_pairs,
    std::span<const LabeledPair> test_pairs, const FeatureContext& context,
    const TrainConfig& config) {
  if (config.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  const std::size_t width = context.schema.total_width();
  if (width == 0) throw std::invalid_argument("feature schema is empty");

  const FeatureMap features = build_feature_map(records, context);
  const std::vector<PairRef> train_refs = make_refs(train_pairs, features);
  const std::vector<PairRef> val_refs = make_refs(val_pairs, features);
  const std::vector<PairRef> test_refs = make_refs(test_pairs, features);

  MlpParams params = init_params(static_cast<uint32_t>(width), config);
  TrainReport report;

  if (config.epochs > 0 && !train_refs.empty()) {
    MlpParams m = zeros_like(params);
    MlpParams v = zeros_like(params);
    uint64_t step = 0;
    // A separate stream from the init draw so reordering one never shifts
    // the other.
    std::mt19937_64 shuffle_rng(config.rng_seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train_refs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<PairRef> batch;
    batch.reserve(config.batch_size);
    for (uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      double epoch_loss = 0.0;
      for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
        const std::size_t end = std::min(order.size(), begin + config.batch_size);
        batch.clear();
        for (std::size_t i = begin; i < end; ++i) batch.push_back(train_refs[order[i]]);

        const BackwardResult back = backward_refs(params, batch);
        epoch_loss += back.loss * static_cast<double>(batch.size());

        ++step;
        const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
          auto update = [&](std::vector<double>& w, std::vector<double>& mw,
                            std::vector<double>& vw, const std::vector<double>& g) {
            for (std::size_t i = 0; i < w.size(); ++i) {
              mw[i] = config.adam_beta1 * mw[i] + (1.0 - config.adam_beta1) * g[i];
              vw[i] = config.adam_beta2 * vw[i] + (1.0 - config.adam_beta2) * g[i] * g[i];
              const double mhat = mw[i] / bc1;
              const double vhat = vw[i] / bc2;
              w[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_epsilon);
            }
          };
          update(params.layers[l].weights, m.layers[l].weights, v.layers[l].weights,
                 back.gradients.layers[l].weights);
          update(params.layers[l].bias, m.layers[l].bias, v.layers[l].bias,
                 back.gradients.layers[l].bias);
        }
      }
      report.train_loss.push_back(epoch_loss / static_cast<double>(train_refs.size()));
      report.val_mae.push_back(mae_over_refs(params, val_refs));
    }
  }

  report.test_mae = mae_over_refs(params, test_refs);
  return {std::move(params), std::move(report)};
}

std::vector<std::pair<uint64_t, std::vector<double>>> embed_all(
    const MlpParams& params, std::span<const CustomerRecord> records,
    const FeatureContext& context, unsigned threads) {
  check_feature_width(params, context);
  std::vector<std::pair<uint64_t, std::vector<double>>> out(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const FeatureVector x = context.extract(records[i]);
    out[i] = {records[i].customer_id, forward(params, x)};
  });
  return out;
}

void save_model(const MlpParams& params, const FeatureSchema& schema,
                const FeatureStats& stats, const std::filesystem::path& path) {
  if (params.layers.empty()) throw std::invalid_argument("model has no layers");
  if (stats.mean.size() != schema.dense_fields.size() ||
      stats.stddev.size() != schema.dense_fields.size()) {
    throw std::invalid_argument("normalizer stats do not match schema dense fields");
  }
  if (params.input_dim() != schema.total_width()) {
    throw std::invalid_argument(
        "model input width " + std::to_string(params.input_dim()) +
        " does not match schema width " + std::to_string(schema.total_width()));
  }

  BinaryWriter w(path);
  w.write_magic("LKEM");
  w.write_u32(kModelVersion);
  w.write_u32(static_cast<uint32_t>(params.layers.size()));
  for (const LayerParams& layer : params.layers) {
    w.write_u32(layer.out_dim);
    w.write_u32(layer.in_dim);
    w.write_f64_span(layer.weights);
    w.write_f64_span(layer.bias);
  }

  json trailer;
  trailer["schema"] = schema_to_json(schema);
  trailer["stats"]["mean"] = stats.mean;
  trailer["stats"]["stddev"] = stats.stddev;
  const std::string text = trailer.dump();
  w.write_u64(text.size());
  w.write_bytes({text.data(), text.size()});
  w.close();
}

LoadedModel load_model(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic("LKEM");
  const uint32_t version = r.read_u32("version");
  if (version != kModelVersion) {
    throw DataError("'" + path.string() + "': unsupported model version " +
                    std::to_string(version));
  }
  const uint32_t n_layers = r.read_u32("layer count");
  if (n_layers == 0) throw DataError("'" + path.string() + "': model has no layers");

  LoadedModel model;
  model.params.layers.resize(n_layers);
  for (uint32_t l = 0; l < n_layers; ++l) {
    LayerParams& layer = model.params.layers[l];
    layer.out_dim = r.read_u32("layer rows");
    layer.in_dim = r.read_u32("layer cols");
    if (layer.out_dim == 0 || layer.in_dim == 0) {
      throw DataError("'" + path.string() + "': layer " + std::to_string(l) +
                      " has zero dimension");
    }
    if (l > 0 && layer.in_dim != model.params.layers[l - 1].out_dim) {
      throw DataError("'" + path.string() + "': layer " + std::to_string(l) +
                      " input width " + std::to_string(layer.in_dim) +
                      " does not match previous output " +
                      std::to_string(model.params.layers[l - 1].out_dim));
    }
    layer.weights.resize(static_cast<std::size_t>(layer.out_dim) * layer.in_dim);
    layer.bias.resize(layer.out_dim);
    r.read_f64_into(layer.weights, "layer weights");
    r.read_f64_into(layer.bias, "layer bias");
  }

  const uint64_t trailer_len = r.read_u64("metadata length");
  const std::string text = r.read_bytes(trailer_len, "metadata");
  if (!r.at_eof()) {
    throw DataError("'" + path.string() + "': trailing bytes after metadata");
  }
  json trailer;
  try {
    trailer = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError("'" + path.string() + "': invalid metadata JSON: " + e.what());
  }
  const std::string where = "'" + path.string() + "'";
  if (!trailer.contains("schema")) throw DataError(where + ": metadata missing 'schema'");
  model.schema = schema_from_json(trailer["schema"], where);
  if (!trailer.contains("stats") || !trailer["stats"].contains("mean") ||
      !trailer["stats"].contains("stddev")) {
    throw DataError(where + ": metadata missing normalizer stats");
  }
  model.stats.mean = trailer["stats"]["mean"].get<std::vector<double>>();
  model.stats.stddev = trailer["stats"]["stddev"].get<std::vector<double>>();
  if (model.stats.mean.size() != model.schema.dense_fields.size() ||
      model.stats.stddev.size() != model.schema.dense_fields.size()) {
    throw DataError(where + ": normalizer stats do not match schema dense fields");
  }
  if (model.params.input_dim() != model.schema.total_width()) {
    throw DataError(where + ": model input width " +
                    std::to_string(model.params.input_dim()) +
                    " does not match schema width " +
                    std::to_string(model.schema.total_width()));
  }
  return model;
}

} // namespace lookalike
