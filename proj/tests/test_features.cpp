#include <doctest.h>

#include "lookalike/customer_data.hpp"
#include "lookalike/errors.hpp"
#include "lookalike/features.hpp"
#include "temp_dir.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

using namespace lookalike;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

WordVectorTable tiny_table() {
  WordVectorTable t;
  t.dimension = 2;
  t.entries["san"] = {1.0f, 0.0f};
  t.entries["jose"] = {0.0f, 1.0f};
  return t;
}

} // namespace

TEST_CASE("word vector files parse into dimension and entries") {
  testutil::TempDir dir("wv");
  write_text(dir.file("v.txt"), "a 1.0 2.0\nb 3.0 4.0\n");
  auto t = load_word_vectors(dir.file("v.txt"));
  CHECK(t.dimension == 2);
  REQUIRE(t.entries.size() == 2);
  CHECK(t.entries.at("a") == std::vector<float>{1.0f, 2.0f});
  CHECK(t.entries.at("b") == std::vector<float>{3.0f, 4.0f});
}

TEST_CASE("a word vector line with the wrong width is reported by line number") {
  testutil::TempDir dir("wv");
  write_text(dir.file("v.txt"), "a 1.0 2.0\nb 3.0 4.0\nc 1.0\n");
  try {
    load_word_vectors(dir.file("v.txt"));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("word vector parse failures are data errors") {
  testutil::TempDir dir("wv");
  write_text(dir.file("empty.txt"), "");
  CHECK_THROWS_AS(load_word_vectors(dir.file("empty.txt")), DataError);
  write_text(dir.file("junk.txt"), "a one two\n");
  CHECK_THROWS_AS(load_word_vectors(dir.file("junk.txt")), DataError);
  CHECK_THROWS_AS(load_word_vectors(dir.file("absent.txt")), DataError);
}

TEST_CASE("word vector tables round trip through their text format") {
  testutil::TempDir dir("wv");
  WordVectorTable t;
  t.dimension = 3;
  t.entries["alpha"] = {0.25f, -1.5f, 3.0f};
  t.entries["beta"] = {1.0f / 3.0f, 0.0f, -7.125f};
  save_word_vectors(t, dir.file("v.txt"));
  auto back = load_word_vectors(dir.file("v.txt"));
  CHECK(back.dimension == t.dimension);
  REQUIRE(back.entries.size() == t.entries.size());
  for (const auto& [tok, vec] : t.entries) CHECK(back.entries.at(tok) == vec);
}

TEST_CASE("location embedding averages known tokens") {
  auto t = tiny_table();

  auto v = embed_location("San Jose", t);
  REQUIRE(v.size() == 2);
  CHECK(v[0] == Approx(0.5).epsilon(1e-12));
  CHECK(v[1] == Approx(0.5).epsilon(1e-12));

  auto oov = embed_location("QQQQQ", t);
  CHECK(oov == std::vector<double>{0.0, 0.0});

  auto rep = embed_location("san san", t);
  CHECK(rep[0] == Approx(1.0).epsilon(1e-12));
  CHECK(rep[1] == Approx(0.0).epsilon(1e-12));

  CHECK(embed_location("", t) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("location embedding ignores case and punctuation") {
  auto t = tiny_table();
  auto a = embed_location("san jose", t);
  CHECK(embed_location("SAN JOSE", t) == a);
  CHECK(embed_location("San-Jose!!", t) == a);
  CHECK(embed_location("  san,   jose.  ", t) == a);
}

TEST_CASE("normalizer computes means and population stddevs per dense field") {
  FeatureSchema schema;
  schema.dense_fields = {"age", "ltv"};

  std::vector<CustomerRecord> recs(2);
  recs[0].customer_id = 1;
  recs[0].dense_stats = {{"age", 1.0}, {"ltv", 10.0}};
  recs[1].customer_id = 2;
  recs[1].dense_stats = {{"age", 3.0}, {"ltv", 10.0}};

  auto stats = fit_normalizer(recs, schema);
  REQUIRE(stats.mean.size() == 2);
  CHECK(stats.mean[0] == Approx(2.0).epsilon(1e-12));
  CHECK(stats.stddev[0] == Approx(1.0).epsilon(1e-12));
  CHECK(stats.mean[1] == Approx(10.0).epsilon(1e-12));
  CHECK(stats.stddev[1] == Approx(0.0).scale(1.0));

  SUBCASE("a single record has zero stddev") {
    auto one = fit_normalizer(std::span<const CustomerRecord>(recs.data(), 1), schema);
    CHECK(one.mean[0] == 1.0);
    CHECK(one.stddev[0] == 0.0);
  }

  SUBCASE("an entirely missing field has zero mean and stddev") {
    FeatureSchema s2;
    s2.dense_fields = {"income"};
    auto st = fit_normalizer(recs, s2);
    CHECK(st.mean[0] == 0.0);
    CHECK(st.stddev[0] == 0.0);
  }
}

TEST_CASE("normalizer fit does not depend on record order") {
  SynthConfig cfg;
  cfg.n_customers = 60;
  cfg.rng_seed = 8;
  auto recs = generate_synthetic(cfg);
  auto schema = infer_schema(recs, 0);

  auto shuffled = recs;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  auto a = fit_normalizer(recs, schema);
  auto b = fit_normalizer(shuffled, schema);
  REQUIRE(a.mean.size() == b.mean.size());
  for (std::size_t i = 0; i < a.mean.size(); ++i) {
    CHECK(a.mean[i] == Approx(b.mean[i]).epsilon(1e-12));
    CHECK(a.stddev[i] == Approx(b.stddev[i]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("feature extraction lays out dense, one-hot and location blocks") {
  FeatureSchema schema;
  schema.dense_fields = {"age", "ltv"};
  schema.categorical_fields = {{"tier", {"bronze", "gold", "silver"}}};
  schema.location_dim = 2;
  CHECK(schema.total_width() == 7);

  FeatureStats stats;
  stats.mean = {40.0, 100.0};
  stats.stddev = {10.0, 50.0};

  WordAveragingEncoder encoder(tiny_table());

  CustomerRecord rec;
  rec.customer_id = 1;
  rec.dense_stats = {{"age", 50.0}, {"ltv", 100.0}};
  rec.demographics = {{"tier", "gold"}};
  rec.location_text = "San Jose";

  auto f = extract_features(rec, schema, stats, &encoder);
  REQUIRE(f.size() == 7);
  CHECK(f[0] == Approx(1.0).epsilon(1e-12));  // (50-40)/10
  CHECK(f[1] == Approx(0.0).scale(1.0));      // at the mean
  CHECK(f[2] == 0.0);                         // bronze
  CHECK(f[3] == 1.0);                         // gold
  CHECK(f[4] == 0.0);                         // silver
  CHECK(f[5] == Approx(0.5).epsilon(1e-12));
  CHECK(f[6] == Approx(0.5).epsilon(1e-12));

  SUBCASE("a record sitting at the means has an all-zero dense block") {
    CustomerRecord at_mean;
    at_mean.customer_id = 2;
    at_mean.dense_stats = {{"age", 40.0}, {"ltv", 100.0}};
    auto g = extract_features(at_mean, schema, stats, &encoder);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
  }

  SUBCASE("an out-of-vocabulary categorical leaves its block all zero") {
    CustomerRecord odd = rec;
    odd.demographics["tier"] = "platinum";
    auto g = extract_features(odd, schema, stats, &encoder);
    CHECK(g[2] == 0.0);
    CHECK(g[3] == 0.0);
    CHECK(g[4] == 0.0);
  }

  SUBCASE("zero stddev maps any value to zero instead of dividing by zero") {
    FeatureStats flat;
    flat.mean = {40.0, 100.0};
    flat.stddev = {10.0, 0.0};
    CustomerRecord r2 = rec;
    r2.dense_stats["ltv"] = 999.0;
    auto g = extract_features(r2, schema, flat, &encoder);
    CHECK(g[1] == 0.0);
  }
}

TEST_CASE("feature width always equals the schema width with at most one hot per block") {
  SynthConfig cfg;
  cfg.n_customers = 120;
  cfg.rng_seed = 19;
  auto recs = generate_synthetic(cfg);
  auto table = synthesize_location_vectors(recs, 8, 3);
  auto encoder = std::make_shared<WordAveragingEncoder>(table);
  auto schema = infer_schema(recs, 8);
  auto stats = fit_normalizer(recs, schema);

  std::size_t offset_cat = schema.dense_fields.size();
  for (const auto& r : recs) {
    auto f = extract_features(r, schema, stats, encoder.get());
    REQUIRE(f.size() == schema.total_width());
    std::size_t pos = offset_cat;
    for (const auto& [name, vocab] : schema.categorical_fields) {
      int hot = 0;
      for (std::size_t j = 0; j < vocab.size(); ++j) {
        CHECK((f[pos + j] == 0.0 || f[pos + j] == 1.0));
        hot += f[pos + j] == 1.0 ? 1 : 0;
      }
      CHECK(hot <= 1);
      pos += vocab.size();
    }
  }
}

TEST_CASE("schema inference sorts fields and vocabularies") {
  std::vector<CustomerRecord> recs(2);
  recs[0].customer_id = 1;
  recs[0].demographics = {{"tier", "silver"}, {"gender", "m"}};
  recs[0].dense_stats = {{"zeta", 1.0}};
  recs[1].customer_id = 2;
  recs[1].demographics = {{"tier", "bronze"}};
  recs[1].dense_stats = {{"alpha", 2.0}};

  auto schema = infer_schema(recs, 4);
  CHECK(schema.dense_fields == std::vector<std::string>{"alpha", "zeta"});
  REQUIRE(schema.categorical_fields.size() == 2);
  CHECK(schema.categorical_fields[0].first == "gender");
  CHECK(schema.categorical_fields[1].first == "tier");
  CHECK(schema.categorical_fields[1].second == std::vector<std::string>{"bronze", "silver"});
  CHECK(schema.location_dim == 4);
  CHECK(schema.total_width() == 2 + 1 + 2 + 4);
}

TEST_CASE("schemas round trip through JSON") {
  testutil::TempDir dir("schema");
  FeatureSchema schema;
  schema.dense_fields = {"age"};
  schema.categorical_fields = {{"tier", {"a", "b"}}};
  schema.location_dim = 3;
  save_schema(schema, dir.file("s.json"));
  auto back = load_schema(dir.file("s.json"));
  CHECK(back.dense_fields == schema.dense_fields);
  CHECK(back.categorical_fields == schema.categorical_fields);
  CHECK(back.location_dim == schema.location_dim);
}

TEST_CASE("synthesized location vectors are per-token deterministic unit vectors") {
  SynthConfig cfg;
  cfg.n_customers = 40;
  cfg.rng_seed = 31;
  auto recs = generate_synthetic(cfg);

  auto t1 = synthesize_location_vectors(recs, 16, 5);
  auto t2 = synthesize_location_vectors(recs, 16, 5);
  CHECK(t1.dimension == 16);
  CHECK_FALSE(t1.entries.empty());
  REQUIRE(t1.entries.size() == t2.entries.size());
  for (const auto& [tok, vec] : t1.entries) {
    CHECK(t2.entries.at(tok) == vec);
    double norm = 0.0;
    for (float x : vec) norm += static_cast<double>(x) * x;
    CHECK(std::sqrt(norm) == Approx(1.0).epsilon(1e-5));
    CHECK(std::all_of(tok.begin(), tok.end(),
                      [](char c) { return c >= 'a' && c <= 'z'; }));
  }

  // A token's vector depends only on the token and the seed, not the corpus.
  auto subset = std::vector<CustomerRecord>(recs.begin(), recs.begin() + 5);
  auto t3 = synthesize_location_vectors(subset, 16, 5);
  for (const auto& [tok, vec] : t3.entries) CHECK(t1.entries.at(tok) == vec);

  auto t4 = synthesize_location_vectors(recs, 16, 6);
  CHECK(t4.entries.begin()->second != t1.entries.at(t4.entries.begin()->first));
}
