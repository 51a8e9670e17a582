#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "tmdcore/errors.hpp"

namespace tmdcore {

// Symmetric pairwise distances stored as the strict upper triangle (i < j),
// row-major, with an implicit zero diagonal.
struct DistanceMatrix {
  std::size_t n = 0;
  std::string metric;
  std::uint32_t depth = 0;
  std::string weight_preset;
  std::vector<double> values;

  static std::size_t pair_count(std::size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

  static std::size_t index(std::size_t i, std::size_t j, std::size_t n) {
    return i * n - i * (i + 1) / 2 + (j - i - 1);
  }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    if (i > j) std::swap(i, j);
    return values[index(i, j, n)];
  }

  bool operator==(const DistanceMatrix&) const = default;
};

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t x) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(x >> (8 * b)));
}

inline void put_u64(std::vector<unsigned char>& out, std::uint64_t x) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(x >> (8 * b)));
}

inline void put_string(std::vector<unsigned char>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t x = 0;
    for (int b = 0; b < width; ++b) x |= std::uint64_t{bytes_[pos_++]} << (8 * b);
    return x;
  }

  std::string string() {
    const auto len = static_cast<std::size_t>(uint(4));
    need(len);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t count) const {
    if (bytes_.size() - pos_ < count) throw IoError("distance cache is truncated");
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

inline constexpr char kCacheMagic[4] = {'T', 'M', 'D', 'C'};
inline constexpr std::uint32_t kCacheVersion = 1;

}  // namespace detail

/// Binary cache layout, all integers little-endian: "TMDC", u32 version (1),
/// u64 n, u32 depth, u32 length + metric tag, u32 length + preset, then the
/// n(n-1)/2 upper-triangle values as IEEE-754 binary64.
inline std::vector<unsigned char> encode_distance_cache(const DistanceMatrix& dm) {
  if (dm.values.size() != DistanceMatrix::pair_count(dm.n)) {
    throw InputError("distance matrix holds " + std::to_string(dm.values.size()) +
                     " values for n = " + std::to_string(dm.n));
  }
  std::vector<unsigned char> out(std::begin(detail::kCacheMagic), std::end(detail::kCacheMagic));
  detail::put_u32(out, detail::kCacheVersion);
  detail::put_u64(out, dm.n);
  detail::put_u32(out, dm.depth);
  detail::put_string(out, dm.metric);
  detail::put_string(out, dm.weight_preset);
  for (double v : dm.values) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline DistanceMatrix decode_distance_cache(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), detail::kCacheMagic, 4) != 0) {
    throw IoError("not a distance cache (bad magic)");
  }
  std::vector<unsigned char> body(bytes.begin() + 4, bytes.end());
  detail::ByteReader in(body);
  const auto version = in.uint(4);
  if (version != detail::kCacheVersion) {
    throw IoError("unsupported distance cache version " + std::to_string(version));
  }
  DistanceMatrix dm;
  dm.n = static_cast<std::size_t>(in.uint(8));
  dm.depth = static_cast<std::uint32_t>(in.uint(4));
  dm.metric = in.string();
  dm.weight_preset = in.string();
  const std::size_t count = DistanceMatrix::pair_count(dm.n);
  if (in.remaining() != count * 8) throw IoError("distance cache payload has the wrong length");
  dm.values.resize(count);
  for (double& v : dm.values) v = std::bit_cast<double>(in.uint(8));
  return dm;
}

/// Writes through a temporary sibling and renames it into place.
inline void write_distance_cache(const std::filesystem::path& path, const DistanceMatrix& dm) {
  const auto bytes = encode_distance_cache(dm);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move cache into place at " + path.string() + ": " + ec.message());
}

inline DistanceMatrix read_distance_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_distance_cache(bytes);
}

}  // namespace tmdcore
