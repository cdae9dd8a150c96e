#include <algorithm>

#include "provlab/dpl.hpp"
#include "provlab/error.hpp"

namespace provlab::dpl {

Band classify(int length) {
  if (length >= 1 && length <= 10) return Band::guide;
  if (length >= 18 && length <= 65) return Band::som;
  if (length >= kIdxBase && length <= kIdxBase + 255) return Band::idx;
  if (length >= kValBase && length <= kValBase + 255) return Band::val;
  if (length >= kLenBase && length <= kLenBase + 255) return Band::len;
  if (length >= kCrcBase && length <= kCrcBase + 255) return Band::crc;
  return Band::none;
}

std::uint8_t crc8(std::span<const std::uint8_t> data) {
  std::uint8_t crc = 0x00;
  for (auto byte : data) {
    crc ^= byte;
    for (int bit = 0; bit < 8; ++bit) crc = (crc & 0x80) ? static_cast<std::uint8_t>((crc << 1) ^ 0x07) : crc << 1;
  }
  return crc;
}

namespace {

std::vector<std::uint8_t> frame_fields(const Credentials& creds) {
  if (creds.ssid.empty() || creds.ssid.size() > kMaxSsid)
    throw Error(Errc::FieldTooLong, "ssid must be 1-32 bytes");
  if (creds.passphrase.size() > kMaxPassphrase) throw Error(Errc::FieldTooLong, "passphrase exceeds 64 bytes");
  std::vector<std::uint8_t> out;
  out.reserve(3 + creds.ssid.size() + creds.passphrase.size() + creds.token.size());
  out.push_back(kPayloadVersion);
  out.push_back(static_cast<std::uint8_t>(creds.ssid.size()));
  out.insert(out.end(), creds.ssid.begin(), creds.ssid.end());
  out.push_back(static_cast<std::uint8_t>(creds.passphrase.size()));
  out.insert(out.end(), creds.passphrase.begin(), creds.passphrase.end());
  out.insert(out.end(), creds.token.begin(), creds.token.end());
  return out;
}

}  // namespace

std::vector<std::uint8_t> build_payload(const Credentials& creds) {
  if (creds.token.size() != kTokenLength)
    throw Error(Errc::BadTokenLength, "token must be 32 characters, got " + std::to_string(creds.token.size()));
  return frame_fields(creds);
}

std::vector<std::uint8_t> build_raw_payload(const Credentials& creds) {
  if (creds.token.empty()) throw Error(Errc::BadTokenLength, "empty token");
  auto out = frame_fields(creds);
  if (out.size() > kMaxPayload) throw Error(Errc::PayloadTooLong);
  return out;
}

Credentials parse_payload_fields(std::span<const std::uint8_t> p) {
  if (p.empty()) throw Error(Errc::TruncatedPayload);
  if (p[0] != kPayloadVersion) throw Error(Errc::BadVersion, "version " + std::to_string(p[0]));
  std::size_t pos = 1;
  auto take_field = [&](std::size_t max) {
    if (pos >= p.size()) throw Error(Errc::TruncatedPayload);
    const std::size_t len = p[pos++];
    if (len > max) throw Error(Errc::FieldTooLong);
    if (pos + len > p.size()) throw Error(Errc::TruncatedPayload);
    std::string s(p.begin() + pos, p.begin() + pos + len);
    pos += len;
    return s;
  };
  Credentials c;
  c.ssid = take_field(kMaxSsid);
  if (c.ssid.empty()) throw Error(Errc::FieldTooLong, "empty ssid");
  c.passphrase = take_field(kMaxPassphrase);
  if (pos >= p.size()) throw Error(Errc::TruncatedPayload, "missing token");
  c.token.assign(p.begin() + pos, p.end());
  return c;
}

Credentials parse_payload(std::span<const std::uint8_t> p) {
  auto c = parse_payload_fields(p);
  if (c.token.size() < kTokenLength) {
    throw Error(Errc::BadTokenLength, "token is " + std::to_string(c.token.size()) + " characters");
  }
  if (c.token.size() > kTokenLength) throw Error(Errc::BadTokenLength, "trailing bytes after token");
  return c;
}

std::vector<int> DplSequence::flatten() const {
  std::vector<int> out;
  out.reserve(size());
  for (const auto& r : rounds) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::size_t DplSequence::size() const {
  std::size_t n = 0;
  for (const auto& r : rounds) n += r.size();
  return n;
}

DplSequence encode_payload(std::span<const std::uint8_t> payload, int rounds) {
  if (rounds < 1 || rounds > kMaxRounds) throw Error(Errc::InvalidRounds, "rounds must be 1-16");
  if (payload.empty() || payload.size() > kMaxPayload) throw Error(Errc::PayloadTooLong);

  const int n = static_cast<int>(payload.size());
  std::vector<int> round;
  round.reserve(round_length(payload.size()));
  for (int rep = 0; rep < kGuideReps; ++rep) round.insert(round.end(), kGuide.begin(), kGuide.end());
  round.insert(round.end(), kSom.begin(), kSom.end());
  round.push_back(kLenBase + n);
  for (int i = 0; i < n; ++i) {
    round.push_back(kIdxBase + i);
    round.push_back(kValBase + payload[i]);
  }
  round.push_back(kCrcBase + crc8(payload));

  DplSequence seq;
  seq.rounds.assign(static_cast<std::size_t>(rounds), round);
  return seq;
}

DplSequence encode(const Credentials& creds, int rounds) { return encode_payload(build_payload(creds), rounds); }

}  // namespace provlab::dpl
