#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "svs/errors.hpp"

namespace svs::binio {

// Little-endian primitives, written byte by byte so files are identical on
// any host.

inline void write_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) fail(ErrorCode::IoFailure, "write failed");
}

inline void read_bytes(std::istream& in, void* data, std::size_t n) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    fail(ErrorCode::IoFailure, "unexpected end of file");
}

template <typename T>
void write_uint(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> buf;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xffu);
  write_bytes(out, buf.data(), buf.size());
}

template <typename T>
T read_uint(std::istream& in) {
  std::array<unsigned char, sizeof(T)> buf;
  read_bytes(in, buf.data(), buf.size());
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(buf[i]) << (8 * i);
  return value;
}

inline void write_u8(std::ostream& out, std::uint8_t v) { write_uint(out, v); }
inline void write_u16(std::ostream& out, std::uint16_t v) { write_uint(out, v); }
inline void write_u32(std::ostream& out, std::uint32_t v) { write_uint(out, v); }
inline void write_u64(std::ostream& out, std::uint64_t v) { write_uint(out, v); }

inline std::uint8_t read_u8(std::istream& in) { return read_uint<std::uint8_t>(in); }
inline std::uint16_t read_u16(std::istream& in) { return read_uint<std::uint16_t>(in); }
inline std::uint32_t read_u32(std::istream& in) { return read_uint<std::uint32_t>(in); }
inline std::uint64_t read_u64(std::istream& in) { return read_uint<std::uint64_t>(in); }

inline void write_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  write_u32(out, bits);
}

inline float read_f32(std::istream& in) {
  const std::uint32_t bits = read_u32(in);
  float v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  write_u64(out, bits);
}

inline double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

inline void write_magic(std::ostream& out, const char magic[4]) {
  write_bytes(out, magic, 4);
}

inline void expect_magic(std::istream& in, const char magic[4],
                         const std::string& what) {
  char buf[4];
  in.read(buf, 4);
  if (in.gcount() != 4 || std::memcmp(buf, magic, 4) != 0)
    fail(ErrorCode::MalformedHeader, "bad magic for " + what);
}

/// CRC-32 (IEEE, reflected 0xEDB88320), used to detect corrupted payloads.
class Crc32 {
 public:
  void update(const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i)
      crc_ = table()[(crc_ ^ bytes[i]) & 0xffu] ^ (crc_ >> 8);
  }

  std::uint32_t value() const { return crc_ ^ 0xffffffffu; }

 private:
  static const std::array<std::uint32_t, 256>& table() {
    static const std::array<std::uint32_t, 256> t = [] {
      std::array<std::uint32_t, 256> out{};
      for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k)
          c = (c & 1u) ? 0xedb88320u ^ (c >> 1) : c >> 1;
        out[i] = c;
      }
      return out;
    }();
    return t;
  }

  std::uint32_t crc_ = 0xffffffffu;
};

}  // namespace svs::binio
