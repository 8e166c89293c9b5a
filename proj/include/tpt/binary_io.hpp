#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "tpt/errors.hpp"

namespace tpt::binio {

// Little-endian scalar packing shared by all binary file formats. Bytes are
// written explicitly so files are identical across host endianness.

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(in.good(), ErrorKind::Data, path, ": truncated while reading ", what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

inline float get_f32(std::istream& in, const std::string& path, const char* what) {
  const std::uint32_t bits = get_u32(in, path, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, const std::string& path, const char* what) {
  const std::uint32_t len = get_u32(in, path, what);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  require(in.good(), ErrorKind::Data, path, ": truncated while reading ", what);
  return s;
}

}  // namespace tpt::binio
