#include "provlab/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>
#include <zlib.h>

#include <memory>

#include "provlab/error.hpp"

namespace provlab::crypto {

namespace {
constexpr std::string_view kB64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

CipherCtx make_gcm(bool encrypt, std::span<const std::uint8_t> key16,
                   std::span<const std::uint8_t> nonce) {
  if (key16.size() != 16 || nonce.size() != kGcmNonceSize)
    throw Error(Errc::BadEncoding, "aes-128-gcm key/nonce size");
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw std::bad_alloc();
  auto init = encrypt ? EVP_EncryptInit_ex : EVP_DecryptInit_ex;
  if (init(ctx.get(), EVP_aes_128_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kGcmNonceSize, nullptr) != 1 ||
      init(ctx.get(), nullptr, nullptr, key16.data(), nonce.data()) != 1)
    throw std::runtime_error("EVP gcm init failed");
  return ctx;
}
}  // namespace

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  // EVP_DecodeBlock tolerates whitespace and stray padding; reject those first.
  if (text.size() % 4 != 0) throw Error(Errc::BadEncoding, "base64 length");
  std::size_t pad = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '=') {
      if (i + 2 < text.size()) throw Error(Errc::BadEncoding, "base64 padding");
      ++pad;
    } else if (pad > 0 || kB64.find(c) == std::string_view::npos) {
      throw Error(Errc::BadEncoding, "base64 alphabet");
    }
  }
  Bytes out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(Errc::BadEncoding, "base64");
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string hex_encode(std::span<const std::uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out += kDigits[b >> 4];
    out += kDigits[b & 0xf];
  }
  return out;
}

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
  std::array<std::uint8_t, 32> md{};
  SHA256(data.data(), data.size(), md.data());
  return md;
}

std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key,
                                         std::span<const std::uint8_t> message) {
  std::array<std::uint8_t, 32> md{};
  unsigned int len = 0;
  static const std::uint8_t kEmpty = 0;
  HMAC(EVP_sha256(), key.empty() ? &kEmpty : key.data(), static_cast<int>(key.size()),
       message.empty() ? &kEmpty : message.data(), message.size(), md.data(), &len);
  return md;
}

std::uint32_t crc32(std::span<const std::uint8_t> data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, data.data(), static_cast<uInt>(data.size()));
  return static_cast<std::uint32_t>(crc & 0xffffffffUL);
}

Bytes aes128_gcm_encrypt(std::span<const std::uint8_t> key16, std::span<const std::uint8_t> nonce,
                         std::span<const std::uint8_t> plaintext) {
  auto ctx = make_gcm(true, key16, nonce);
  Bytes out(plaintext.size() + kGcmTagSize);
  int len = 0;
  if (!plaintext.empty() &&
      EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1)
    throw std::runtime_error("EVP_EncryptUpdate failed");
  int fin = 0;
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1)
    throw std::runtime_error("EVP_EncryptFinal_ex failed");
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kGcmTagSize,
                          out.data() + plaintext.size()) != 1)
    throw std::runtime_error("gcm get tag failed");
  return out;
}

Bytes aes128_gcm_decrypt(std::span<const std::uint8_t> key16, std::span<const std::uint8_t> nonce,
                         std::span<const std::uint8_t> ciphertext_and_tag) {
  if (ciphertext_and_tag.size() < kGcmTagSize) throw Error(Errc::AuthFailure, "short ciphertext");
  auto ctx = make_gcm(false, key16, nonce);
  const auto body = ciphertext_and_tag.first(ciphertext_and_tag.size() - kGcmTagSize);
  auto tag = ciphertext_and_tag.last(kGcmTagSize);
  Bytes out(body.size());
  int len = 0;
  if (!body.empty() &&
      EVP_DecryptUpdate(ctx.get(), out.data(), &len, body.data(), static_cast<int>(body.size())) != 1)
    throw Error(Errc::AuthFailure);
  Bytes tag_copy(tag.begin(), tag.end());
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kGcmTagSize, tag_copy.data()) != 1)
    throw Error(Errc::AuthFailure);
  int fin = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1) throw Error(Errc::AuthFailure);
  return out;
}

bool constant_time_equal(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

}  // namespace provlab::crypto
