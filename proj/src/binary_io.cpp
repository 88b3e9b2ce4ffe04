#include "spred/binary_io.hpp"

namespace spred::io {

void BinaryWriter::tag(std::string_view four_cc) {
  if (four_cc.size() != 4) throw std::invalid_argument("BinaryWriter::tag: tag must be 4 bytes");
  out_.write(four_cc.data(), 4);
}

std::string BinaryReader::tag() {
  std::string t(4, '\0');
  in_.read(t.data(), 4);
  if (in_.gcount() != 4) throw FormatError(source_ + ": unexpected end of file reading tag");
  return t;
}

void BinaryReader::expect_tag(std::string_view four_cc) {
  const std::string got = tag();
  if (got != four_cc) {
    throw FormatError(source_ + ": expected tag '" + std::string(four_cc) + "', found '" + got + "'");
  }
}

std::vector<char> BinaryReader::bytes(std::size_t n) {
  std::vector<char> out(n);
  in_.read(out.data(), static_cast<std::streamsize>(n));
  if (in_.gcount() != static_cast<std::streamsize>(n)) {
    throw FormatError(source_ + ": unexpected end of file");
  }
  return out;
}

bool BinaryReader::at_end() { return in_.peek() == std::char_traits<char>::eof(); }

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace spred::io
