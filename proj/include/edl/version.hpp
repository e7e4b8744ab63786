#pragma once

#include <cstdint>
#include <string_view>

namespace edl {

inline constexpr std::string_view kVersion = "0.1.0";

/// 64-bit FNV-1a; used to fingerprint configuration text in file headers.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace edl
