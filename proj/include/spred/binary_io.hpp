#pragma once

// Little-endian binary helpers shared by the dataset, checkpoint and feature
// dump formats. Values are encoded byte by byte so files are identical across
// hosts regardless of native endianness.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spred::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void tag(std::string_view four_cc);
  void u32(std::uint32_t v) { put_le(v); }
  void i32(std::int32_t v) { put_le(static_cast<std::uint32_t>(v)); }
  void u64(std::uint64_t v) { put_le(v); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> values) {
    for (double v : values) f64(v);
  }
  void bytes(std::span<const char> data) { out_.write(data.data(), static_cast<std::streamsize>(data.size())); }

 private:
  template <typename U>
  void put_le(U v) {
    std::array<char, sizeof(U)> buf{};
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(buf.data(), buf.size());
  }

  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  /// Throws FormatError unless the next four bytes equal `four_cc`.
  void expect_tag(std::string_view four_cc);
  std::string tag();
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(get_le<std::uint32_t>()); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  std::vector<double> f64s(std::size_t n) {
    std::vector<double> out(n);
    for (double& v : out) v = f64();
    return out;
  }
  std::vector<char> bytes(std::size_t n);
  bool at_end();
  const std::string& source() const { return source_; }

 private:
  template <typename U>
  U get_le() {
    std::array<unsigned char, sizeof(U)> buf{};
    in_.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (in_.gcount() != static_cast<std::streamsize>(buf.size())) {
      throw FormatError(source_ + ": unexpected end of file");
    }
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }

  std::istream& in_;
  std::string source_;
};

/// 64-bit FNV-1a, used for config fingerprints.
std::uint64_t fnv1a(std::string_view text);

}  // namespace spred::io
