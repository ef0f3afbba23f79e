#include <doctest.h>

#include "lookalike/ann_index.hpp"
#include "lookalike/errors.hpp"
#include "temp_dir.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace lookalike;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

EmbeddingMatrix random_matrix(std::size_t n, uint32_t dim, uint64_t seed,
                              uint64_t first_id = 0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  EmbeddingMatrix m;
  std::vector<float> row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : row) v = normal(rng);
    m.append(first_id + i, row);
  }
  return m;
}

std::vector<float> random_query(std::mt19937_64& rng, uint32_t dim) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> q(dim);
  for (auto& v : q) v = normal(rng);
  return q;
}

double recall_at_k(const std::vector<SearchHit>& got,
                   const std::vector<SearchHit>& truth, std::size_t k) {
  std::set<uint64_t> truth_ids;
  for (std::size_t i = 0; i < std::min(k, truth.size()); ++i)
    truth_ids.insert(truth[i].customer_id);
  if (truth_ids.empty()) return 1.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < std::min(k, got.size()); ++i)
    hit += truth_ids.count(got[i].customer_id);
  return static_cast<double>(hit) / static_cast<double>(truth_ids.size());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("brute force ranks by cosine with deterministic ties") {
  EmbeddingMatrix m;
  m.append(0, std::vector<float>{1.0f, 0.0f});
  m.append(1, std::vector<float>{0.0f, 1.0f});

  auto hits = brute_force_knn(std::vector<float>{1.0f, 0.0f}, m, 2);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].customer_id == 0);
  CHECK(hits[0].score == Approx(1.0).epsilon(1e-12));
  CHECK(hits[1].customer_id == 1);
  CHECK(hits[1].score == Approx(0.0).scale(1.0).epsilon(1e-12));

  SUBCASE("a row equal to the query scores 1 first") {
    auto big = random_matrix(50, 8, 4);
    std::vector<float> q(big.row(17).begin(), big.row(17).end());
    auto top = brute_force_knn(q, big, 5);
    REQUIRE_FALSE(top.empty());
    CHECK(top[0].customer_id == 17);
    CHECK(top[0].score == Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("k larger than the matrix returns every row") {
    auto big = random_matrix(10, 4, 9);
    std::mt19937_64 rng(1);
    CHECK(brute_force_knn(random_query(rng, 4), big, 99).size() == 10);
  }

  SUBCASE("equal scores break ties by ascending id") {
    EmbeddingMatrix dup;
    dup.append(9, std::vector<float>{1.0f, 0.0f});
    dup.append(3, std::vector<float>{1.0f, 0.0f});
    dup.append(6, std::vector<float>{2.0f, 0.0f});
    auto t = brute_force_knn(std::vector<float>{1.0f, 0.0f}, dup, 3);
    CHECK(t[0].customer_id == 3);
    CHECK(t[1].customer_id == 6);
    CHECK(t[2].customer_id == 9);
  }

  SUBCASE("a zero query scores everything 0 in id order") {
    auto big = random_matrix(5, 3, 2);
    auto t = brute_force_knn(std::vector<float>{0.0f, 0.0f, 0.0f}, big, 5);
    REQUIRE(t.size() == 5);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(t[i].score == 0.0);
      CHECK(t[i].customer_id == i);
    }
  }

  SUBCASE("bad arguments are rejected") {
    auto big = random_matrix(5, 3, 2);
    CHECK_THROWS_AS(brute_force_knn(std::vector<float>{1.0f}, big, 2),
                    std::invalid_argument);
    CHECK_THROWS_AS(brute_force_knn(std::vector<float>{1.0f, 0.0f, 0.0f}, big, 0),
                    std::invalid_argument);
  }
}

TEST_CASE("kmeans recovers structure and is deterministic") {
  SUBCASE("one cluster is the coordinate-wise mean") {
    std::vector<float> data{1.0f, 2.0f, 3.0f, 6.0f, 5.0f, 10.0f};
    auto c = kmeans(data, 2, 1, 10, 1);
    REQUIRE(c.size() == 2);
    CHECK(c[0] == Approx(3.0).epsilon(1e-6));
    CHECK(c[1] == Approx(6.0).epsilon(1e-6));
  }

  SUBCASE("two tight blobs are found within 0.1") {
    std::mt19937_64 rng(33);
    std::normal_distribution<float> jitter(0.0f, 0.01f);
    std::vector<float> data;
    const std::vector<float> mu_a{5.0f, 0.0f};
    const std::vector<float> mu_b{-5.0f, 1.0f};
    for (int i = 0; i < 100; ++i) {
      data.push_back(mu_a[0] + jitter(rng));
      data.push_back(mu_a[1] + jitter(rng));
      data.push_back(mu_b[0] + jitter(rng));
      data.push_back(mu_b[1] + jitter(rng));
    }
    auto c = kmeans(data, 2, 2, 25, 7);
    REQUIRE(c.size() == 4);
    auto close = [](float cx, float cy, const std::vector<float>& mu) {
      return std::abs(cx - mu[0]) < 0.1 && std::abs(cy - mu[1]) < 0.1;
    };
    bool order_ab = close(c[0], c[1], mu_a) && close(c[2], c[3], mu_b);
    bool order_ba = close(c[0], c[1], mu_b) && close(c[2], c[3], mu_a);
    CHECK((order_ab || order_ba));
  }

  SUBCASE("the same seed gives identical centroids") {
    auto m = random_matrix(200, 6, 11);
    auto c1 = kmeans(m.data, 6, 8, 25, 3);
    auto c2 = kmeans(m.data, 6, 8, 25, 3);
    CHECK(c1 == c2);
  }

  SUBCASE("degenerate arguments are rejected") {
    std::vector<float> data{1.0f, 2.0f};
    CHECK_THROWS_AS(kmeans(data, 2, 2, 10, 1), std::invalid_argument); // 1 point, 2 clusters
    CHECK_THROWS_AS(kmeans(data, 2, 0, 10, 1), std::invalid_argument);
    CHECK_THROWS_AS(kmeans({}, 2, 1, 10, 1), std::invalid_argument);
  }
}

TEST_CASE("the index partitions every row exactly once") {
  auto m = random_matrix(500, 8, 21);
  auto index = build_ivf(m, 10, 5);
  CHECK(index.nlist == 10);
  CHECK(index.dim == 8);

  std::size_t total = 0;
  std::set<uint64_t> seen;
  for (uint32_t l = 0; l < index.nlist; ++l) {
    total += index.list_ids[l].size();
    CHECK(index.list_vectors[l].size() == index.list_ids[l].size() * index.dim);
    for (uint64_t id : index.list_ids[l]) CHECK(seen.insert(id).second);
    // Stored vectors are unit norm.
    for (std::size_t r = 0; r < index.list_ids[l].size(); ++r) {
      double norm = 0.0;
      for (uint32_t d = 0; d < index.dim; ++d) {
        float v = index.list_vectors[l][r * index.dim + d];
        norm += static_cast<double>(v) * v;
      }
      CHECK(std::sqrt(norm) == Approx(1.0).epsilon(1e-5));
    }
  }
  CHECK(total == m.row_count());
  CHECK(index.stored_count() == m.row_count());

  SUBCASE("nlist of one files everything together") {
    auto single = build_ivf(m, 1, 5);
    REQUIRE(single.list_ids.size() == 1);
    CHECK(single.list_ids[0].size() == m.row_count());
  }

  SUBCASE("a healthy random index leaves no list empty") {
    auto big = random_matrix(10000, 16, 1);
    auto idx = build_ivf(big, 64, 2);
    for (const auto& ids : idx.list_ids) CHECK_FALSE(ids.empty());
  }
}

TEST_CASE("zero-norm rows cannot be indexed") {
  EmbeddingMatrix m;
  m.append(1, std::vector<float>{1.0f, 0.0f});
  m.append(2, std::vector<float>{0.0f, 0.0f});
  try {
    build_ivf(m, 1, 1);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("index construction rejects bad arguments") {
  auto m = random_matrix(10, 4, 3);
  CHECK_THROWS_AS(build_ivf(m, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_ivf(m, 11, 1), std::invalid_argument);
  EmbeddingMatrix empty;
  CHECK_THROWS_AS(build_ivf(empty, 1, 1), std::invalid_argument);

  EmbeddingMatrix dup;
  dup.append(5, std::vector<float>{1.0f, 0.0f});
  dup.append(5, std::vector<float>{0.0f, 1.0f});
  CHECK_THROWS_AS(build_ivf(dup, 1, 1), DataError);
}

TEST_CASE("probing every list reproduces brute force exactly") {
  auto m = random_matrix(5000, 16, 77);
  auto index = build_ivf(m, 32, 8);
  std::mt19937_64 rng(99);
  for (int qi = 0; qi < 50; ++qi) {
    auto q = random_query(rng, 16);
    auto exact = brute_force_knn(q, m, 10);
    auto full = search(index, q, 10, 32);
    REQUIRE(full.size() == exact.size());
    for (std::size_t i = 0; i < exact.size(); ++i) {
      CHECK(full[i].customer_id == exact[i].customer_id);
      CHECK(full[i].score == Approx(exact[i].score).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("a single probe returns a subset of the brute-force ranking") {
  EmbeddingMatrix m;
  m.append(0, std::vector<float>{1.0f, 0.0f});
  m.append(1, std::vector<float>{0.0f, 1.0f});
  auto index = build_ivf(m, 2, 1);

  std::vector<float> q{0.9f, 0.1f};
  auto hits = search(index, q, 2, 1);
  REQUIRE(hits.size() == 1); // only the probed list's single row
  CHECK(hits[0].customer_id == 0);

  auto exact = brute_force_knn(q, m, 2);
  CHECK(hits[0].customer_id == exact[0].customer_id);
  CHECK(hits[0].score == Approx(exact[0].score).epsilon(1e-6));
}

TEST_CASE("search scores are cosine against the original unnormalized query") {
  auto m = random_matrix(300, 8, 13);
  auto index = build_ivf(m, 8, 4);
  std::mt19937_64 rng(14);
  auto q = random_query(rng, 8);
  // Scale the query; cosine must not change.
  std::vector<float> q4(q);
  for (auto& v : q4) v *= 4.0f;
  auto h1 = search(index, q, 5, 8);
  auto h2 = search(index, q4, 5, 8);
  REQUIRE(h1.size() == h2.size());
  for (std::size_t i = 0; i < h1.size(); ++i) {
    CHECK(h1[i].customer_id == h2[i].customer_id);
    CHECK(h1[i].score == Approx(h2[i].score).epsilon(1e-6));
  }

  // And the scores match a direct cosine with the raw stored row.
  auto exact = brute_force_knn(q, m, 5);
  for (std::size_t i = 0; i < h1.size(); ++i)
    CHECK(h1[i].score == Approx(exact[i].score).epsilon(1e-6).scale(1.0));
}

TEST_CASE("recall never drops as nprobe grows") {
  auto m = random_matrix(2000, 16, 5);
  auto index = build_ivf(m, 32, 6);
  std::mt19937_64 rng(7);

  std::vector<std::vector<float>> queries;
  for (int i = 0; i < 50; ++i) queries.push_back(random_query(rng, 16));

  std::vector<double> recalls;
  for (uint32_t nprobe : {1u, 2u, 4u, 8u, 16u, 32u}) {
    double total = 0.0;
    for (const auto& q : queries) {
      auto truth = brute_force_knn(q, m, 10);
      auto got = search(index, q, 10, nprobe);
      total += recall_at_k(got, truth, 10);
    }
    recalls.push_back(total / static_cast<double>(queries.size()));
  }
  for (std::size_t i = 1; i < recalls.size(); ++i) CHECK(recalls[i] >= recalls[i - 1]);
  CHECK(recalls.back() == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("search argument validation and degenerate queries") {
  auto m = random_matrix(100, 4, 31);
  auto index = build_ivf(m, 4, 1);

  CHECK(search(index, std::vector<float>{0.0f, 0.0f, 0.0f, 0.0f}, 5, 2).empty());
  CHECK_THROWS_AS(search(index, std::vector<float>{1.0f, 0.0f, 0.0f, 0.0f}, 0, 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(search(index, std::vector<float>{1.0f, 0.0f, 0.0f, 0.0f}, 5, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(search(index, std::vector<float>{1.0f, 0.0f, 0.0f, 0.0f}, 5, 5),
                  std::invalid_argument);
  CHECK_THROWS_AS(search(index, std::vector<float>{1.0f, 0.0f}, 5, 2),
                  std::invalid_argument);
}

TEST_CASE("index defaults follow the documented formulas") {
  CHECK(default_nlist(0) == 1);
  CHECK(default_nlist(1) == 1);
  CHECK(default_nlist(100) == 10);
  CHECK(default_nlist(50) == 8);          // ceil(sqrt(50)) = 8, capped at 50
  CHECK(default_nlist(10) == 4);          // ceil(sqrt(10)) = 4
  CHECK(default_nlist(100000000) == 4096); // hard cap
  CHECK(default_nlist(3) == 2);

  CHECK(default_nprobe(1) == 1);
  CHECK(default_nprobe(8) == 1);
  CHECK(default_nprobe(64) == 8);
  CHECK(default_nprobe(4096) == 512);
}

TEST_CASE("embeddings round trip through their binary file") {
  testutil::TempDir dir("emb");
  auto m = random_matrix(120, 8, 17, 1000);
  save_embeddings(m, dir.file("e.lkev"));
  auto back = load_embeddings(dir.file("e.lkev"));
  CHECK(back.dim == m.dim);
  CHECK(back.ids == m.ids);
  CHECK(back.data == m.data);

  SUBCASE("truncation is detected") {
    fs::resize_file(dir.file("e.lkev"), fs::file_size(dir.file("e.lkev")) - 7);
    CHECK_THROWS_AS(load_embeddings(dir.file("e.lkev")), DataError);
  }

  SUBCASE("trailing bytes are detected") {
    std::ofstream f(dir.file("e.lkev"), std::ios::app | std::ios::binary);
    f << "x";
    f.close();
    CHECK_THROWS_AS(load_embeddings(dir.file("e.lkev")), DataError);
  }
}

TEST_CASE("an index file reloads into an equivalent searcher") {
  testutil::TempDir dir("idx");
  auto m = random_matrix(800, 8, 23);
  auto index = build_ivf(m, 16, 9);
  save_index(index, dir.file("i.lkix"));
  auto back = load_index(dir.file("i.lkix"));

  CHECK(back.dim == index.dim);
  CHECK(back.nlist == index.nlist);
  CHECK(back.centroids == index.centroids);

  std::mt19937_64 rng(3);
  for (int qi = 0; qi < 100; ++qi) {
    auto q = random_query(rng, 8);
    auto h1 = search(index, q, 7, 4);
    auto h2 = search(back, q, 7, 4);
    REQUIRE(h1.size() == h2.size());
    for (std::size_t i = 0; i < h1.size(); ++i) {
      CHECK(h1[i].customer_id == h2[i].customer_id);
      CHECK(h1[i].score == h2[i].score); // bit-identical math on identical bytes
    }
  }
}

TEST_CASE("identical seeds produce byte-identical index files") {
  testutil::TempDir dir("idx");
  auto m = random_matrix(600, 8, 29);
  save_index(build_ivf(m, 12, 4), dir.file("a.lkix"));
  save_index(build_ivf(m, 12, 4), dir.file("b.lkix"));
  CHECK(slurp(dir.file("a.lkix")) == slurp(dir.file("b.lkix")));
}

TEST_CASE("corrupt index files are rejected by name") {
  testutil::TempDir dir("idx");
  auto m = random_matrix(100, 4, 37);
  auto index = build_ivf(m, 4, 2);
  save_index(index, dir.file("i.lkix"));

  SUBCASE("truncation") {
    fs::resize_file(dir.file("i.lkix"), fs::file_size(dir.file("i.lkix")) / 3);
    CHECK_THROWS_AS(load_index(dir.file("i.lkix")), DataError);
  }

  SUBCASE("wrong version") {
    std::fstream f(dir.file("i.lkix"), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    uint32_t v = 42;
    f.write(reinterpret_cast<const char*>(&v), 4);
    f.close();
    try {
      load_index(dir.file("i.lkix"));
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }

  SUBCASE("a corrupted stored vector breaks the unit-norm check") {
    // Zero out a block in the middle of the posting data.
    auto size = fs::file_size(dir.file("i.lkix"));
    std::fstream f(dir.file("i.lkix"), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(size) - 16);
    const char zeros[16] = {};
    f.write(zeros, sizeof zeros);
    f.close();
    CHECK_THROWS_AS(load_index(dir.file("i.lkix")), DataError);
  }
}
