#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Thin wrappers over OpenSSL and zlib primitives.
namespace provlab::crypto {

using Bytes = std::vector<std::uint8_t>;

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline std::string to_string(std::span<const std::uint8_t> b) {
  return std::string(b.begin(), b.end());
}

std::string base64_encode(std::span<const std::uint8_t> data);
/// Strict RFC 4648 decoding; throws Error(BadEncoding).
Bytes base64_decode(std::string_view text);

std::string hex_encode(std::span<const std::uint8_t> data);

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);
std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key,
                                         std::span<const std::uint8_t> message);

std::uint32_t crc32(std::span<const std::uint8_t> data);

inline constexpr std::size_t kGcmNonceSize = 12;
inline constexpr std::size_t kGcmTagSize = 16;

/// Returns ciphertext || tag.
Bytes aes128_gcm_encrypt(std::span<const std::uint8_t> key16, std::span<const std::uint8_t> nonce,
                         std::span<const std::uint8_t> plaintext);
/// Throws Error(AuthFailure) when the tag does not verify.
Bytes aes128_gcm_decrypt(std::span<const std::uint8_t> key16, std::span<const std::uint8_t> nonce,
                         std::span<const std::uint8_t> ciphertext_and_tag);

bool constant_time_equal(std::string_view a, std::string_view b);

}  // namespace provlab::crypto
