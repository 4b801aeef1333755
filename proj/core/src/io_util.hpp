#pragma once

// Internal helpers for binary/text file IO: explicit little-endian encoding,
// 17-significant-digit decimal formatting, and atomic whole-file writes.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <string>

#include "owleye/error.hpp"

namespace owleye::io {

inline void write_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

inline void write_u16(std::ostream& os, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void write_f64(std::ostream& os, double v) {
  write_u64(os, std::bit_cast<std::uint64_t>(v));
}

class Reader {
public:
  Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  std::uint64_t offset() const { return offset_; }

  std::uint8_t u8() {
    unsigned char b;
    take(reinterpret_cast<char*>(&b), 1);
    return b;
  }
  std::uint16_t u16() {
    unsigned char b[2];
    take(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    unsigned char b[4];
    take(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    take(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

  void bytes(char* dst, std::size_t count) { take(dst, count); }

  void expect_magic(const char (&magic)[5]) {
    char got[4];
    take(got, 4);
    if (std::string_view(got, 4) != std::string_view(magic, 4))
      throw FormatError(source_ + ": bad magic at byte 0 (expected \"" +
                        std::string(magic, 4) + "\")");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_ + ": " + what + " at byte " + std::to_string(offset_));
  }

private:
  void take(char* dst, std::size_t count) {
    is_.read(dst, static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(is_.gcount()) != count)
      throw FormatError(source_ + ": truncated at byte " +
                        std::to_string(offset_ + static_cast<std::uint64_t>(is_.gcount())));
    offset_ += count;
  }

  std::istream& is_;
  std::string source_;
  std::uint64_t offset_ = 0;
};

/// Decimal formatting used by every CSV emitter: round-trips within 1e-12.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Writes via a temp file in the same directory, then renames over `path`.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

}  // namespace owleye::io
