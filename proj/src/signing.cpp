#include "provlab/secrets.hpp"

#include "provlab/envelope.hpp"
#include "provlab/error.hpp"

namespace provlab::secrets {

using nlohmann::json;

void to_json(json& j, const SigningKeySet& k) {
  j = json{{"certHash", k.cert_hash}, {"secret1", k.secret1}, {"secret2", k.secret2}};
}

void from_json(const json& j, SigningKeySet& k) {
  j.at("certHash").get_to(k.cert_hash);
  j.at("secret1").get_to(k.secret1);
  j.at("secret2").get_to(k.secret2);
}

crypto::Bytes derive_signing_key(const SigningKeySet& keys) {
  if (keys.cert_hash.empty()) throw Error(Errc::EmptyKeyPart, "certHash");
  if (keys.secret1.empty()) throw Error(Errc::EmptyKeyPart, "secret1");
  if (keys.secret2.empty()) throw Error(Errc::EmptyKeyPart, "secret2");
  return crypto::to_bytes(keys.cert_hash + "_" + keys.secret2 + "_" + keys.secret1);
}

std::string sign_envelope(const json& fields, std::span<const std::uint8_t> key) {
  const auto text = protocol::canonicalize(fields);
  const auto mac = crypto::hmac_sha256(key, crypto::as_bytes(text));
  return crypto::hex_encode(mac);
}

bool verify_envelope(const json& envelope, std::span<const std::uint8_t> key) {
  if (!envelope.is_object()) throw Error(Errc::MissingSign, "envelope is not an object");
  auto it = envelope.find("sign");
  if (it == envelope.end() || !it->is_string()) throw Error(Errc::MissingSign);
  return crypto::constant_time_equal(sign_envelope(envelope, key), it->get<std::string>());
}

namespace {

crypto::Bytes cipher_key(std::span<const std::uint8_t> key) {
  const auto digest = crypto::sha256(key);
  return crypto::Bytes(digest.begin(), digest.begin() + 16);
}

}  // namespace

std::string seal_postdata(std::span<const std::uint8_t> plaintext, std::span<const std::uint8_t> key, Rng& rng) {
  crypto::Bytes nonce(crypto::kGcmNonceSize);
  rng.fill(nonce);
  auto body = crypto::aes128_gcm_encrypt(cipher_key(key), nonce, plaintext);
  nonce.insert(nonce.end(), body.begin(), body.end());
  return crypto::base64_encode(nonce);
}

crypto::Bytes open_postdata(std::string_view sealed, std::span<const std::uint8_t> key) {
  const auto raw = crypto::base64_decode(sealed);
  if (raw.size() < crypto::kGcmNonceSize + crypto::kGcmTagSize)
    throw Error(Errc::BadEncoding, "sealed postData too short");
  const std::span<const std::uint8_t> all(raw);
  return crypto::aes128_gcm_decrypt(cipher_key(key), all.first(crypto::kGcmNonceSize),
                                    all.subspan(crypto::kGcmNonceSize));
}

}  // namespace provlab::secrets
