#pragma once

// Little-endian helpers shared by the CALEEMB1 and CALEADP1 containers.

#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>

namespace cale::detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

// Bytes left in a seekable stream, or max() when the stream cannot tell.
inline std::size_t remaining(std::istream& in) {
  const auto here = in.tellg();
  if (here < 0) return std::numeric_limits<std::size_t>::max();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  if (end < here) return 0;
  return static_cast<std::size_t>(end - here);
}

}  // namespace cale::detail
