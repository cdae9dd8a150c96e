#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "provlab/random.hpp"

namespace provlab::bmp {

inline constexpr std::size_t kFileHeaderSize = 14;
inline constexpr std::size_t kInfoHeaderSize = 40;

/// A 24-bit uncompressed BMP kept as its raw file bytes. Only the pixel
/// array (from bfOffBits on) is ever modified.
class Image {
 public:
  /// Throws NotUncompressed24Bit for any other format or a truncated file.
  static Image parse(std::vector<std::uint8_t> file);
  static Image read(const std::filesystem::path& path);
  /// Noise-filled image of the given size, for fixtures and tests.
  static Image generate(int width, int height, Rng& rng);

  void write(const std::filesystem::path& path) const;

  const std::vector<std::uint8_t>& bytes() const { return file_; }
  std::size_t pixel_offset() const { return offset_; }
  std::span<std::uint8_t> pixels() { return std::span(file_).subspan(offset_, length_); }
  std::span<const std::uint8_t> pixels() const { return std::span(file_).subspan(offset_, length_); }
  std::span<const std::uint8_t> header() const { return std::span(file_).first(offset_); }
  int width() const { return width_; }
  int height() const { return height_; }

 private:
  std::vector<std::uint8_t> file_;
  std::size_t offset_ = 0;
  std::size_t length_ = 0;
  int width_ = 0;
  int height_ = 0;
};

}  // namespace provlab::bmp
