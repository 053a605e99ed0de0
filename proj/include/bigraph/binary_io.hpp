#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "bigraph/image.hpp"

// Little-endian primitives shared by the BIGI, BIGW and BIGP formats.
namespace bigraph::binary {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline void write_magic(std::ostream& os, std::string_view magic) { os.write(magic.data(), 4); }

inline void expect_magic(std::istream& is, std::string_view magic) {
  char buf[4] = {};
  is.read(buf, 4);
  if (!is || std::string_view(buf, 4) != magic) {
    throw IoError("bad magic: expected " + std::string(magic));
  }
}

template <class T>
void write(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw IoError("unexpected end of file");
  return value;
}

inline void write_string(std::ostream& os, std::string_view s) {
  write<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read<std::uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw IoError("unexpected end of file in string");
  return s;
}

}  // namespace bigraph::binary
