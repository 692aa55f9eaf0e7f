#include "catart/binary_io.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

#include "catart/errors.hpp"

namespace catart::io {

namespace {
constexpr std::uint64_t kMaxDim = 1ULL << 32;
}

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
}

void BinaryWriter::raw(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw std::runtime_error("write failed on '" + path_.string() + "'");
}

void BinaryWriter::magic(std::string_view tag) { raw(tag.data(), 8); }

void BinaryWriter::matrix(const nn::Matrix& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  f64s(m.data(), static_cast<std::size_t>(m.size()));
}

void BinaryWriter::vector(const nn::Vector& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  f64s(v.data(), static_cast<std::size_t>(v.size()));
}

void BinaryWriter::mlp(const nn::Mlp& mlp) {
  u64(mlp.sizes().size());
  for (const int s : mlp.sizes()) u64(static_cast<std::uint64_t>(s));
  for (const auto& l : mlp.layers()) {
    matrix(l.weight);
    vector(l.bias);
    vector(l.prelu_slope);
  }
}

void BinaryWriter::close() {
  out_.close();
  if (!out_) throw std::runtime_error("close failed on '" + path_.string() + "'");
}

BinaryReader::BinaryReader(const std::filesystem::path& path)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw PipelineError("cannot open checkpoint '" + path.string() + "'");
}

void BinaryReader::raw(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw ParseError("truncated checkpoint '" + path_.string() + "'");
  }
}

void BinaryReader::expect_magic(std::string_view tag) {
  std::array<char, 8> buf{};
  raw(buf.data(), buf.size());
  if (std::string_view(buf.data(), 8) != tag.substr(0, 8)) {
    throw ParseError("'" + path_.string() + "' is not a " + std::string(tag.substr(0, 7)) +
                     " checkpoint");
  }
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  raw(&v, sizeof v);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  raw(&v, sizeof v);
  return v;
}

std::int64_t BinaryReader::i64() {
  std::int64_t v;
  raw(&v, sizeof v);
  return v;
}

double BinaryReader::f64() {
  double v;
  raw(&v, sizeof v);
  return v;
}

void BinaryReader::f64s(double* data, std::size_t n) { raw(data, n * sizeof(double)); }

nn::Matrix BinaryReader::matrix() {
  const auto rows = u64();
  const auto cols = u64();
  if (rows > kMaxDim || cols > kMaxDim) throw ParseError("implausible matrix shape in checkpoint");
  nn::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  f64s(m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

nn::Vector BinaryReader::vector() {
  const auto n = u64();
  if (n > kMaxDim) throw ParseError("implausible vector length in checkpoint");
  nn::Vector v(static_cast<Eigen::Index>(n));
  f64s(v.data(), static_cast<std::size_t>(v.size()));
  return v;
}

nn::Mlp BinaryReader::mlp() {
  const auto n_sizes = u64();
  if (n_sizes < 2 || n_sizes > 64) throw ParseError("implausible mlp depth in checkpoint");
  std::vector<int> sizes;
  for (std::uint64_t i = 0; i < n_sizes; ++i) sizes.push_back(static_cast<int>(u64()));
  nn::Mlp out = nn::Mlp::zeros(sizes);
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    auto& l = out.layer(k);
    nn::Matrix w = matrix();
    nn::Vector b = vector();
    nn::Vector s = vector();
    if (w.rows() != l.weight.rows() || w.cols() != l.weight.cols() || b.size() != l.bias.size() ||
        s.size() != l.prelu_slope.size()) {
      throw ParseError("mlp layer shape disagrees with its declared sizes");
    }
    l.weight = std::move(w);
    l.bias = std::move(b);
    l.prelu_slope = std::move(s);
  }
  return out;
}

void BinaryReader::expect_end() {
  if (in_.peek() != std::char_traits<char>::eof()) {
    throw ParseError("trailing bytes in checkpoint '" + path_.string() + "'");
  }
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("cannot hash missing file '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    const auto got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace catart::io
