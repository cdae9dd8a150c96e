#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "provlab/crypto.hpp"
#include "provlab/random.hpp"

namespace provlab::secrets {

/// The three key parts a vendor app combines into its request-signing key.
struct SigningKeySet {
  std::string cert_hash;
  std::string secret1;
  std::string secret2;

  bool operator==(const SigningKeySet&) const = default;
};

void to_json(nlohmann::json& j, const SigningKeySet& k);
void from_json(const nlohmann::json& j, SigningKeySet& k);

/// Bytes of "certHash_secret2_secret1". Throws EmptyKeyPart.
crypto::Bytes derive_signing_key(const SigningKeySet& keys);

/// Lowercase hex HMAC-SHA256 over the canonical form of `fields`. Any
/// existing `sign` member is ignored.
std::string sign_envelope(const nlohmann::json& fields, std::span<const std::uint8_t> key);

/// Throws MissingSign when `envelope` carries no string `sign`.
bool verify_envelope(const nlohmann::json& envelope, std::span<const std::uint8_t> key);

/// base64(nonce || AES-128-GCM(ciphertext || tag)); the cipher key is the
/// first 16 bytes of SHA-256(key).
std::string seal_postdata(std::span<const std::uint8_t> plaintext, std::span<const std::uint8_t> key, Rng& rng);
/// Throws BadEncoding or AuthFailure.
crypto::Bytes open_postdata(std::string_view sealed, std::span<const std::uint8_t> key);

}  // namespace provlab::secrets
