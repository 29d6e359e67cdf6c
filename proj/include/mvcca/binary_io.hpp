#pragma once

// Little-endian primitive encoding shared by the model and feature formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "mvcca/error.hpp"

namespace mvcca::binary {

template <typename T>
concept Primitive = std::is_arithmetic_v<T>;

template <typename U>
U byteswap_unsigned(U value) {
  U out = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out = static_cast<U>((out << 8) | (value & 0xFF));
    value = static_cast<U>(value >> 8);
  }
  return out;
}

template <std::size_t N>
struct UnsignedOfSize;
template <> struct UnsignedOfSize<1> { using type = std::uint8_t; };
template <> struct UnsignedOfSize<2> { using type = std::uint16_t; };
template <> struct UnsignedOfSize<4> { using type = std::uint32_t; };
template <> struct UnsignedOfSize<8> { using type = std::uint64_t; };

template <Primitive T>
void write(std::ostream& out, T value) {
  using U = typename UnsignedOfSize<sizeof(T)>::type;
  U bits = std::bit_cast<U>(value);
  if constexpr (std::endian::native == std::endian::big) bits = byteswap_unsigned(bits);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &bits, sizeof(T));
  out.write(bytes.data(), sizeof(T));
}

template <Primitive T>
T read(std::istream& in, const char* what) {
  using U = typename UnsignedOfSize<sizeof(T)>::type;
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), sizeof(T))) {
    throw Error(ErrorKind::FormatError,
                std::string("unexpected end of file reading ") + what);
  }
  U bits;
  std::memcpy(&bits, bytes.data(), sizeof(T));
  if constexpr (std::endian::native == std::endian::big) bits = byteswap_unsigned(bits);
  return std::bit_cast<T>(bits);
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) {
  out.write(magic, 4);
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw Error(ErrorKind::FormatError,
                std::string("bad magic, expected \"") + magic + "\"");
  }
}

}  // namespace mvcca::binary
