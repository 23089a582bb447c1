#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>

#include "dph/errors.hpp"

namespace dph {

// Little-endian scalar I/O and shortest-round-trip decimal formatting.
// These are the only primitives the file formats are built from, so every
// on-disk byte is pinned independent of host endianness or locale.

inline void write_u64_le(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

inline std::uint64_t read_u64_le(std::istream& in, std::uint64_t& offset) {
  char buf[8];
  in.read(buf, 8);
  if (in.gcount() != 8) {
    throw IoError("truncated file: expected 8 bytes at offset " +
                  std::to_string(offset));
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  }
  offset += 8;
  return v;
}

inline void write_f64_le(std::ostream& out, double v) {
  write_u64_le(out, std::bit_cast<std::uint64_t>(v));
}

inline double read_f64_le(std::istream& in, std::uint64_t& offset) {
  return std::bit_cast<double>(read_u64_le(in, offset));
}

// Shortest decimal string that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& context) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ParseError("bad float '" + std::string(text) + "' in " + context);
  }
  return v;
}

inline std::uint64_t parse_u64(std::string_view text, const std::string& context) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ParseError("bad integer '" + std::string(text) + "' in " + context);
  }
  return v;
}

inline long long parse_i64(std::string_view text, const std::string& context) {
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ParseError("bad integer '" + std::string(text) + "' in " + context);
  }
  return v;
}

} // namespace dph
