#include "provlab/random.hpp"

namespace provlab {

namespace {
constexpr std::string_view kAlnum = "abcdefghijklmnopqrstuvwxyz0123456789";
constexpr std::string_view kHex = "0123456789abcdef";

// FNV-1a, only used to derive child seeds.
std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) return 0;
  // rejection sampling keeps the draw unbiased
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

void Rng::fill(std::span<std::uint8_t> out) {
  for (auto& b : out) b = static_cast<std::uint8_t>(engine_() & 0xff);
}

std::string Rng::alnum(std::size_t length) {
  std::string s(length, '\0');
  for (auto& c : s) c = kAlnum[below(kAlnum.size())];
  return s;
}

std::string Rng::hex(std::size_t length) {
  std::string s(length, '\0');
  for (auto& c : s) c = kHex[below(kHex.size())];
  return s;
}

Rng Rng::fork(std::string_view salt) { return Rng(engine_() ^ fnv1a(salt)); }

}  // namespace provlab
