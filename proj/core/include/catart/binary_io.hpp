#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "catart/nn.hpp"

namespace catart::io {

static_assert(std::endian::native == std::endian::little,
              "checkpoint files are written in host byte order, which must be little-endian");

/// Magic tags (8 bytes each) identifying checkpoint kinds.
inline constexpr std::string_view kEmbeddingMagic{"CATEMBT\0", 8};
inline constexpr std::string_view kCatMagic{"CATCATM\0", 8};
inline constexpr std::string_view kArtMagic{"CATARTM\0", 8};

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);

  void magic(std::string_view tag);
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void f64s(const double* data, std::size_t n) { raw(data, n * sizeof(double)); }
  void matrix(const nn::Matrix& m);
  void vector(const nn::Vector& v);
  void mlp(const nn::Mlp& mlp);
  void close();

 private:
  void raw(const void* data, std::size_t n);
  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);

  /// Throws ParseError when the next 8 bytes are not `tag`.
  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  void f64s(double* data, std::size_t n);
  nn::Matrix matrix();
  nn::Vector vector();
  nn::Mlp mlp();
  /// Throws ParseError if bytes remain.
  void expect_end();

 private:
  void raw(void* data, std::size_t n);
  std::filesystem::path path_;
  std::ifstream in_;
};

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace catart::io
