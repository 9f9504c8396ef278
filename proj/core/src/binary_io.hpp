#pragma once

// Little-endian primitive readers/writers shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "aler/types.hpp"

namespace aler::detail {

template <typename T>
T byteswap_if_big(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  value = byteswap_if_big(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ValidationError(std::string("truncated binary file while reading ") + what);
  return byteswap_if_big(value);
}

inline void write_short_string(std::ostream& out, const std::string& s) {
  if (s.size() > 0xFFFF) throw ValidationError("identifier longer than 65535 bytes: " + s.substr(0, 32));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_short_string(std::istream& in) {
  const auto len = read_le<std::uint16_t>(in, "identifier length");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw ValidationError("truncated binary file while reading identifier");
  return s;
}

}  // namespace aler::detail
