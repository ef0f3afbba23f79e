#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace lookalike {

// Little-endian binary readers/writers for the .lkem/.lkev/.lkix files.
// The reader tracks its byte offset so load errors can name the exact
// position where a file stopped making sense.

class BinaryWriter {
public:
  explicit BinaryWriter(const std::filesystem::path& path);

  void write_magic(const char magic[4]);
  void write_u32(uint32_t v);
  void write_u64(uint64_t v);
  void write_f32(float v);
  void write_f64(double v);
  void write_f32_span(std::span<const float> v);
  void write_f64_span(std::span<const double> v);
  void write_bytes(std::span<const char> bytes);

  void close();

private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class BinaryReader {
public:
  explicit BinaryReader(const std::filesystem::path& path);

  /// Consumes 4 bytes and fails unless they equal `magic`.
  void expect_magic(const char magic[4]);
  uint32_t read_u32(const char* what);
  uint64_t read_u64(const char* what);
  float read_f32(const char* what);
  double read_f64(const char* what);
  void read_f32_into(std::span<float> dst, const char* what);
  void read_f64_into(std::span<double> dst, const char* what);
  std::string read_bytes(std::size_t n, const char* what);

  uint64_t offset() const { return offset_; }
  bool at_eof();

private:
  void fill(char* dst, std::size_t n, const char* what);

  std::ifstream in_;
  std::filesystem::path path_;
  uint64_t offset_ = 0;
};

} // namespace lookalike
