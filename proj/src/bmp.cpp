#include "provlab/bmp.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>

#include "provlab/error.hpp"

namespace provlab::bmp {

namespace {

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

std::uint16_t le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

void put32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put16(std::vector<std::uint8_t>& b, std::size_t at, std::uint16_t v) {
  b[at] = static_cast<std::uint8_t>(v);
  b[at + 1] = static_cast<std::uint8_t>(v >> 8);
}

std::size_t row_stride(int width) { return (static_cast<std::size_t>(width) * 3 + 3) & ~std::size_t{3}; }

}  // namespace

Image Image::parse(std::vector<std::uint8_t> file) {
  auto bad = [](const char* why) { return Error(Errc::NotUncompressed24Bit, why); };
  if (file.size() < kFileHeaderSize + kInfoHeaderSize) throw bad("file too short for BMP headers");
  if (file[0] != 'B' || file[1] != 'M') throw bad("missing BM signature");
  const std::uint32_t off_bits = le32(file, 10);
  const std::uint32_t dib_size = le32(file, 14);
  if (dib_size < kInfoHeaderSize) throw bad("unsupported DIB header");
  const auto width = static_cast<std::int32_t>(le32(file, 18));
  const auto height = static_cast<std::int32_t>(le32(file, 22));
  if (le16(file, 26) != 1) throw bad("planes != 1");
  if (le16(file, 28) != 24) throw bad("not 24 bits per pixel");
  if (le32(file, 30) != 0) throw bad("compressed");
  if (width <= 0 || height == 0) throw bad("empty image");
  if (off_bits < kFileHeaderSize + dib_size || off_bits > file.size()) throw bad("bfOffBits out of range");

  const std::size_t need = row_stride(width) * static_cast<std::size_t>(std::abs(height));
  if (file.size() - off_bits < need) throw bad("pixel array truncated");

  Image img;
  img.file_ = std::move(file);
  img.offset_ = off_bits;
  img.length_ = need;
  img.width_ = width;
  img.height_ = std::abs(height);
  return img;
}

Image Image::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(std::move(bytes));
}

Image Image::generate(int width, int height, Rng& rng) {
  if (width <= 0 || height <= 0) throw Error(Errc::InvalidLength, "image dimensions");
  const std::size_t stride = row_stride(width);
  const std::size_t pixels = stride * static_cast<std::size_t>(height);
  const std::size_t off = kFileHeaderSize + kInfoHeaderSize;
  std::vector<std::uint8_t> b(off + pixels, 0);
  b[0] = 'B';
  b[1] = 'M';
  put32(b, 2, static_cast<std::uint32_t>(b.size()));
  put32(b, 10, static_cast<std::uint32_t>(off));
  put32(b, 14, kInfoHeaderSize);
  put32(b, 18, static_cast<std::uint32_t>(width));
  put32(b, 22, static_cast<std::uint32_t>(height));
  put16(b, 26, 1);
  put16(b, 28, 24);
  put32(b, 34, static_cast<std::uint32_t>(pixels));
  put32(b, 38, 2835);  // 72 dpi
  put32(b, 42, 2835);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t at = off + static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x) * 3;
      // a soft gradient with noise, so LSB changes are not the only texture
      const auto noise = static_cast<int>(rng.below(32));
      b[at] = static_cast<std::uint8_t>((x * 255 / width + noise) & 0xFF);
      b[at + 1] = static_cast<std::uint8_t>((y * 255 / height + noise) & 0xFF);
      b[at + 2] = static_cast<std::uint8_t>((128 + noise * 3) & 0xFF);
    }
  }
  return parse(std::move(b));
}

void Image::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(file_.data()), static_cast<std::streamsize>(file_.size()));
  if (!out) throw Error(Errc::Io, "short write to " + path.string());
}

}  // namespace provlab::bmp
