#include <doctest.h>

#include "lookalike/binary_io.hpp"
#include "lookalike/errors.hpp"
#include "temp_dir.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace lookalike;
namespace fs = std::filesystem;

namespace {

void truncate_file(const fs::path& path, uint64_t size) {
  fs::resize_file(path, size);
}

} // namespace

TEST_CASE("binary round trip preserves every scalar and span") {
  testutil::TempDir dir("binio");
  const fs::path path = dir.file("blob.bin");

  const std::vector<float> f32s{1.5f, -2.25f, 0.0f, 3.0e-7f};
  const std::vector<double> f64s{3.14159, -1e300, 0.0};
  const std::string text = "trailer payload";

  {
    BinaryWriter w(path);
    w.write_magic("LKTT");
    w.write_u32(7);
    w.write_u64(0x0123456789abcdefULL);
    w.write_f32(2.5f);
    w.write_f64(-0.125);
    w.write_f32_span(f32s);
    w.write_f64_span(f64s);
    w.write_bytes(std::span<const char>(text.data(), text.size()));
    w.close();
  }

  BinaryReader r(path);
  r.expect_magic("LKTT");
  CHECK(r.read_u32("small") == 7);
  CHECK(r.read_u64("big") == 0x0123456789abcdefULL);
  CHECK(r.read_f32("f") == 2.5f);
  CHECK(r.read_f64("d") == -0.125);
  std::vector<float> f32_back(f32s.size());
  r.read_f32_into(f32_back, "f32s");
  CHECK(f32_back == f32s);
  std::vector<double> f64_back(f64s.size());
  r.read_f64_into(f64_back, "f64s");
  CHECK(f64_back == f64s);
  CHECK(r.read_bytes(text.size(), "trailer") == text);
  CHECK(r.at_eof());
}

TEST_CASE("reader rejects a wrong magic and names the file") {
  testutil::TempDir dir("binio");
  const fs::path path = dir.file("blob.bin");
  {
    BinaryWriter w(path);
    w.write_magic("AAAA");
    w.close();
  }
  BinaryReader r(path);
  CHECK_THROWS_AS(r.expect_magic("LKEM"), DataError);
}

TEST_CASE("truncated file errors name the missing field") {
  testutil::TempDir dir("binio");
  const fs::path path = dir.file("blob.bin");
  {
    BinaryWriter w(path);
    w.write_magic("LKTT");
    w.write_u64(42);
    w.close();
  }
  truncate_file(path, 8); // cuts the u64 in half

  BinaryReader r(path);
  r.expect_magic("LKTT");
  try {
    r.read_u64("record count");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("record count") != std::string::npos);
  }
}

TEST_CASE("reader tracks its byte offset") {
  testutil::TempDir dir("binio");
  const fs::path path = dir.file("blob.bin");
  {
    BinaryWriter w(path);
    w.write_magic("LKTT");
    w.write_u32(1);
    w.write_f64(2.0);
    w.close();
  }
  BinaryReader r(path);
  CHECK(r.offset() == 0);
  r.expect_magic("LKTT");
  CHECK(r.offset() == 4);
  r.read_u32("x");
  CHECK(r.offset() == 8);
  r.read_f64("y");
  CHECK(r.offset() == 16);
  CHECK(r.at_eof());
}

TEST_CASE("opening a missing file fails") {
  testutil::TempDir dir("binio");
  CHECK_THROWS_AS(BinaryReader(dir.file("absent.bin")), DataError);
}
