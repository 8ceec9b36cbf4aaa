#pragma once

// Little-endian primitives for the on-disk formats, written byte by byte so
// files are identical regardless of host endianness. Readers throw
// FormatError on truncation. The CRC-32 is the usual reflected 0xEDB88320
// polynomial over the raw bytes.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "eegnet/error.hpp"

namespace eegnet::binio {

inline void write_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

inline void write_u16(std::ostream& os, std::uint16_t v) {
  write_u8(os, static_cast<std::uint8_t>(v & 0xff));
  write_u8(os, static_cast<std::uint8_t>(v >> 8));
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) write_u8(os, static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) write_u8(os, static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void write_f32(std::ostream& os, float v) {
  write_u32(os, std::bit_cast<std::uint32_t>(v));
}

inline void write_f64(std::ostream& os, double v) {
  write_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline std::uint8_t read_u8(std::istream& is) {
  const int c = is.get();
  if (c == std::istream::traits_type::eof()) {
    throw FormatError("unexpected end of file");
  }
  return static_cast<std::uint8_t>(c);
}

inline std::uint16_t read_u16(std::istream& is) {
  const std::uint16_t lo = read_u8(is);
  const std::uint16_t hi = read_u8(is);
  return static_cast<std::uint16_t>(lo | (hi << 8));
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(read_u8(is)) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(read_u8(is)) << (8 * i);
  return v;
}

inline float read_f32(std::istream& is) {
  return std::bit_cast<float>(read_u32(is));
}

inline double read_f64(std::istream& is) {
  return std::bit_cast<double>(read_u64(is));
}

inline const std::array<std::uint32_t, 256>& crc32_table() {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1u) ? 0xedb88320u ^ (c >> 1) : (c >> 1);
      }
      t[i] = c;
    }
    return t;
  }();
  return table;
}

class Crc32 {
 public:
  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    const auto& table = crc32_table();
    for (std::size_t i = 0; i < len; ++i) {
      state_ = table[(state_ ^ p[i]) & 0xffu] ^ (state_ >> 8);
    }
  }
  std::uint32_t value() const { return state_ ^ 0xffffffffu; }

 private:
  std::uint32_t state_ = 0xffffffffu;
};

inline std::uint32_t crc32(const std::string& bytes) {
  Crc32 c;
  c.update(bytes.data(), bytes.size());
  return c.value();
}

}  // namespace eegnet::binio
