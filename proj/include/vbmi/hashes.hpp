#pragma once

#include <cstdint>
#include <cstddef>
#include <span>
#include <string_view>

namespace vbmi {

// FNV-1a, used for montage/code fingerprints carried in model metadata.
constexpr uint32_t fnv1a32(std::string_view s) {
  uint32_t h = 2166136261u;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 16777619u;
  }
  return h;
}

// CRC-32 (ISO-HDLC, the zlib polynomial), over arbitrary bytes.
uint32_t crc32(std::span<const uint8_t> data);

// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, xorout 0.
uint16_t crc16_ccitt_false(std::span<const uint8_t> data);

// splitmix64, used to derive independent RNG seeds from (seed, index) pairs.
constexpr uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace vbmi
