#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "provlab/bmp.hpp"

namespace provlab::stego {

inline constexpr std::uint8_t kMagic0 = 0xA5;
inline constexpr std::uint8_t kMagic1 = 0x5A;
inline constexpr std::size_t kMaxKeyLength = 64;

/// A5 5A | keys_cnt | (len | bytes) * keys_cnt
struct Record {
  std::vector<std::string> keys;

  bool operator==(const Record&) const = default;
};

std::vector<std::uint8_t> serialize(const Record& record);

/// Byte index within the pixel array where a record of `record_size` bytes
/// starts for this seed: crc32(seed) mod (pixel_len - record_bits - 1).
std::size_t start_offset(std::string_view seed, std::size_t pixel_len, std::size_t record_size);

/// Writes each record bit, MSB first, into the LSB of consecutive pixel
/// bytes. Throws InsufficientCapacity.
bmp::Image embed(bmp::Image image, std::string_view seed, const Record& record);

struct Extraction {
  Record record;
  std::uint32_t seed_hash = 0;
  /// File offset of the first pixel byte carrying each key.
  std::vector<std::size_t> key_offsets;
};

/// Throws MagicMismatch when no record is found for this seed.
Extraction extract(const bmp::Image& image, std::string_view seed);

/// Text printed by `provlab r-keys`, one line per entry:
///   opening: <path>
///   read <n> bytes
///   str hash: 0x<crc32 of seed, 8 hex digits>
///   keys_cnt: <n>
///   [<i>] offs = 0x<8 hex digits>
///   [KEY] [<i>] str: <key>
std::string format_report(std::string_view path, std::size_t file_size, const Extraction& result);

}  // namespace provlab::stego
