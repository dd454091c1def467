#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "strk/errors.hpp"

// Little-endian binary writer/reader with a running CRC32, used by the
// dataset and checkpoint formats. Values are written in their native x86
// layout; a static check below keeps big-endian builds from silently
// producing incompatible files.

static_assert(std::endian::native == std::endian::little,
              "file formats are defined little-endian");

namespace strk {

uint32_t crc32_update(uint32_t crc, const void* data, size_t len);

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, size_t len) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    crc_ = crc32_update(crc_, data, len);
  }
  void u32(uint32_t v) { bytes(&v, sizeof v); }
  void u64(uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void matrix(const Eigen::MatrixXd& m) {
    u64(static_cast<uint64_t>(m.rows()));
    u64(static_cast<uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
  void vector(const Eigen::VectorXd& v) {
    u64(static_cast<uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }

  uint32_t crc() const { return crc_; }
  // Appends the running CRC; it is not folded into itself.
  void finish_with_crc() {
    uint32_t c = crc_;
    out_.write(reinterpret_cast<const char*>(&c), sizeof c);
  }

 private:
  std::ostream& out_;
  uint32_t crc_ = 0xFFFFFFFFu;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  void bytes(void* data, size_t len) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
    if (static_cast<size_t>(in_.gcount()) != len)
      throw TruncationError("file ended mid-record");
    crc_ = crc32_update(crc_, data, len);
  }
  uint32_t u32() {
    uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  uint64_t u64() {
    uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    uint64_t n = u64();
    if (n > (1ull << 32)) throw FormatError("unreasonable string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  Eigen::MatrixXd matrix() {
    uint64_t rows = u64(), cols = u64();
    if (rows > (1ull << 24) || cols > (1ull << 24))
      throw FormatError("unreasonable matrix dimensions");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    return m;
  }
  Eigen::VectorXd vector() {
    uint64_t n = u64();
    if (n > (1ull << 32)) throw FormatError("unreasonable vector length");
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
    return v;
  }

  uint32_t crc() const { return crc_; }
  // Reads the trailing CRC (not CRC'd itself) and compares.
  void verify_trailing_crc() {
    uint32_t expect = crc_;
    uint32_t stored;
    in_.read(reinterpret_cast<char*>(&stored), sizeof stored);
    if (in_.gcount() != sizeof stored)
      throw TruncationError("file ended before checksum");
    if (stored != expect) throw ChecksumError("checksum mismatch");
  }

 private:
  std::istream& in_;
  uint32_t crc_ = 0xFFFFFFFFu;
};

// Deterministic per-index RNG streams: stream(seed, i) is independent of how
// many other streams were drawn, so parallel generation cannot reorder
// content.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::mt19937_64 stream_rng(uint64_t seed, uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(index + 1)));
}

// mt19937_64 state round-trips exactly through its text representation.
std::string rng_to_string(const std::mt19937_64& rng);
std::mt19937_64 rng_from_string(const std::string& s);

}  // namespace strk
