#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

// Little-endian primitive I/O shared by the snapshot and checkpoint formats.
namespace hot::binio {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("binary read: truncated");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ostream& os, double x) {
  std::uint64_t u;
  std::memcpy(&u, &x, 8);
  unsigned char b[8];
  for (int t = 0; t < 8; ++t) b[t] = static_cast<unsigned char>(u >> (8 * t));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("binary read: truncated");
  std::uint64_t u = 0;
  for (int t = 0; t < 8; ++t) u |= static_cast<std::uint64_t>(b[t]) << (8 * t);
  double x;
  std::memcpy(&x, &u, 8);
  return x;
}

inline void put_block(std::ostream& os, const char magic[4], std::uint32_t version, const std::string& header) {
  os.write(magic, 4);
  put_u32(os, version);
  put_u32(os, static_cast<std::uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
}

inline std::string get_block(std::istream& is, const char magic[4], std::uint32_t version) {
  char m[4];
  if (!is.read(m, 4) || std::memcmp(m, magic, 4) != 0) throw std::runtime_error("binary read: bad magic");
  if (get_u32(is) != version) throw std::runtime_error("binary read: unsupported version");
  std::string s(get_u32(is), '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(s.size()))) throw std::runtime_error("binary read: truncated");
  return s;
}

}  // namespace hot::binio
