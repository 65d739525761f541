#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <utility>
#include <ostream>
#include <stdexcept>

namespace blindloom::detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&value, b, sizeof(T));
  }
  return value;
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline void put_f32(std::ostream& os, float f) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  put_u32(os, bits);
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) return false;
  v = to_little(v);
  return true;
}

inline bool get_f32(std::istream& is, float& f) {
  std::uint32_t bits = 0;
  if (!get_u32(is, bits)) return false;
  f = std::bit_cast<float>(bits);
  return true;
}

}  // namespace blindloom::detail
