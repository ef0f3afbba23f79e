#include "lookalike/binary_io.hpp"

#include "lookalike/errors.hpp"

#include <bit>
#include <cstring>

namespace lookalike {

namespace {

template <typename T>
std::array<char, sizeof(T)> to_le_bytes(T v) {
  static_assert(std::is_unsigned_v<T>);
  std::array<char, sizeof(T)> out{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  return out;
}

template <typename T>
T from_le_bytes(const char* bytes) {
  static_assert(std::is_unsigned_v<T>);
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return v;
}

} // namespace

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) {
    throw DataError("cannot open '" + path.string() + "' for writing");
  }
}

void BinaryWriter::write_magic(const char magic[4]) {
  out_.write(magic, 4);
}

void BinaryWriter::write_u32(uint32_t v) {
  auto b = to_le_bytes(v);
  out_.write(b.data(), b.size());
}

void BinaryWriter::write_u64(uint64_t v) {
  auto b = to_le_bytes(v);
  out_.write(b.data(), b.size());
}

void BinaryWriter::write_f32(float v) {
  write_u32(std::bit_cast<uint32_t>(v));
}

void BinaryWriter::write_f64(double v) {
  write_u64(std::bit_cast<uint64_t>(v));
}

void BinaryWriter::write_f32_span(std::span<const float> v) {
  for (float x : v) write_f32(x);
}

void BinaryWriter::write_f64_span(std::span<const double> v) {
  for (double x : v) write_f64(x);
}

void BinaryWriter::write_bytes(std::span<const char> bytes) {
  out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void BinaryWriter::close() {
  out_.close();
  if (!out_) {
    throw DataError("failed writing '" + path_.string() + "'");
  }
}

BinaryReader::BinaryReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) {
    throw DataError("cannot open '" + path.string() + "' for reading");
  }
}

void BinaryReader::fill(char* dst, std::size_t n, const char* what) {
  in_.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw DataError("'" + path_.string() + "': truncated while reading " +
                    what + " at offset " + std::to_string(offset_));
  }
  offset_ += n;
}

void BinaryReader::expect_magic(const char magic[4]) {
  char buf[4];
  fill(buf, 4, "magic");
  if (std::memcmp(buf, magic, 4) != 0) {
    throw DataError("'" + path_.string() + "': bad magic at offset 0, expected '" +
                    std::string(magic, 4) + "' got '" + std::string(buf, 4) + "'");
  }
}

uint32_t BinaryReader::read_u32(const char* what) {
  char buf[4];
  fill(buf, 4, what);
  return from_le_bytes<uint32_t>(buf);
}

uint64_t BinaryReader::read_u64(const char* what) {
  char buf[8];
  fill(buf, 8, what);
  return from_le_bytes<uint64_t>(buf);
}

float BinaryReader::read_f32(const char* what) {
  return std::bit_cast<float>(read_u32(what));
}

double BinaryReader::read_f64(const char* what) {
  return std::bit_cast<double>(read_u64(what));
}

void BinaryReader::read_f32_into(std::span<float> dst, const char* what) {
  for (float& x : dst) x = read_f32(what);
}

void BinaryReader::read_f64_into(std::span<double> dst, const char* what) {
  for (double& x : dst) x = read_f64(what);
}

std::string BinaryReader::read_bytes(std::size_t n, const char* what) {
  std::string s(n, '\0');
  fill(s.data(), n, what);
  return s;
}

bool BinaryReader::at_eof() {
  return in_.peek() == std::ifstream::traits_type::eof();
}

} // namespace lookalike
