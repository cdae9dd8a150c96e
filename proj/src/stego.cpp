#include "provlab/stego.hpp"

#include <algorithm>
#include <cstdio>

#include "provlab/crypto.hpp"
#include "provlab/error.hpp"

namespace provlab::stego {

std::vector<std::uint8_t> serialize(const Record& record) {
  if (record.keys.empty() || record.keys.size() > 255) throw Error(Errc::InvalidLength, "keys_cnt must be 1-255");
  std::vector<std::uint8_t> out{kMagic0, kMagic1, static_cast<std::uint8_t>(record.keys.size())};
  for (const auto& key : record.keys) {
    if (key.empty() || key.size() > kMaxKeyLength) throw Error(Errc::InvalidLength, "key length must be 1-64");
    out.push_back(static_cast<std::uint8_t>(key.size()));
    out.insert(out.end(), key.begin(), key.end());
  }
  return out;
}

std::size_t start_offset(std::string_view seed, std::size_t pixel_len, std::size_t record_size) {
  const std::size_t bits = record_size * 8;
  if (pixel_len < bits + 2) throw Error(Errc::InsufficientCapacity, "pixel array too small for record");
  return crypto::crc32(crypto::as_bytes(seed)) % (pixel_len - bits - 1);
}

bmp::Image embed(bmp::Image image, std::string_view seed, const Record& record) {
  const auto data = serialize(record);
  auto px = image.pixels();
  const std::size_t start = start_offset(seed, px.size(), data.size());
  std::size_t at = start;
  for (auto byte : data) {
    for (int bit = 7; bit >= 0; --bit) {
      px[at] = static_cast<std::uint8_t>((px[at] & 0xFE) | ((byte >> bit) & 1));
      ++at;
    }
  }
  return image;
}

namespace {

std::uint8_t read_byte(std::span<const std::uint8_t> px, std::size_t at) {
  std::uint8_t v = 0;
  for (int i = 0; i < 8; ++i) v = static_cast<std::uint8_t>(v << 1 | (px[at + i] & 1));
  return v;
}

// Parses a record of exactly `size` bytes at `start`, or returns false.
bool try_parse(std::span<const std::uint8_t> px, std::size_t start, std::size_t size, Extraction& out) {
  auto byte_at = [&](std::size_t i) { return read_byte(px, start + 8 * i); };
  if (size < 5 || byte_at(0) != kMagic0 || byte_at(1) != kMagic1) return false;
  const std::size_t count = byte_at(2);
  if (count == 0) return false;
  std::size_t pos = 3;
  Extraction ex;
  for (std::size_t k = 0; k < count; ++k) {
    if (pos >= size) return false;
    const std::size_t len = byte_at(pos++);
    if (len == 0 || len > kMaxKeyLength || pos + len > size) return false;
    ex.key_offsets.push_back(start + 8 * pos);
    std::string key;
    for (std::size_t i = 0; i < len; ++i) key.push_back(static_cast<char>(byte_at(pos + i)));
    ex.record.keys.push_back(std::move(key));
    pos += len;
  }
  if (pos != size) return false;
  out = std::move(ex);
  return true;
}

}  // namespace

Extraction extract(const bmp::Image& image, std::string_view seed) {
  const auto px = image.pixels();
  const std::uint32_t hash = crypto::crc32(crypto::as_bytes(seed));
  // The start offset depends on the record size, which is only known once the
  // record is read, so try each feasible size and keep the self-consistent one.
  const std::size_t max_size = std::min<std::size_t>(3 + 255 * (1 + kMaxKeyLength), px.size() / 8);
  for (std::size_t size = 5; size <= max_size; ++size) {
    if (px.size() < size * 8 + 2) break;
    const std::size_t start = hash % (px.size() - size * 8 - 1);
    Extraction ex;
    if (try_parse(px, start, size, ex)) {
      ex.seed_hash = hash;
      for (auto& off : ex.key_offsets) off += image.pixel_offset();
      return ex;
    }
  }
  throw Error(Errc::MagicMismatch, "no record for this seed");
}

std::string format_report(std::string_view path, std::size_t file_size, const Extraction& result) {
  std::string out;
  char line[128];
  out += "opening: " + std::string(path) + "\n";
  out += "read " + std::to_string(file_size) + " bytes\n";
  std::snprintf(line, sizeof line, "str hash: 0x%08x\n", result.seed_hash);
  out += line;
  out += "keys_cnt: " + std::to_string(result.record.keys.size()) + "\n";
  for (std::size_t i = 0; i < result.key_offsets.size(); ++i) {
    std::snprintf(line, sizeof line, "[%zu] offs = 0x%08zx\n", i, result.key_offsets[i]);
    out += line;
  }
  for (std::size_t i = 0; i < result.record.keys.size(); ++i)
    out += "[KEY] [" + std::to_string(i) + "] str: " + result.record.keys[i] + "\n";
  return out;
}

}  // namespace provlab::stego
