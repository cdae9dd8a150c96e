#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <regex>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "provlab/bmp.hpp"
#include "provlab/crypto.hpp"
#include "provlab/envelope.hpp"
#include "provlab/error.hpp"
#include "provlab/secrets.hpp"
#include "provlab/stego.hpp"

using namespace provlab;
using nlohmann::json;

namespace {

json load_vector() {
  std::ifstream in(std::string(PROVLAB_VECTORS) + "/sign.json");
  return json::parse(in);
}

secrets::SigningKeySet vector_keys(const json& v) { return v.at("keys").get<secrets::SigningKeySet>(); }

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

// Reflected CRC-32, bit at a time.
std::uint32_t crc32_reference(std::string_view s) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (unsigned char ch : s) {
    c ^= ch;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? (c >> 1) ^ 0xEDB88320u : c >> 1;
  }
  return c ^ 0xFFFFFFFFu;
}

std::string lower_alnum(Rng& rng, std::size_t n) {
  static constexpr std::string_view kAlpha = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += kAlpha[rng.below(kAlpha.size())];
  return s;
}

}  // namespace

TEST_CASE("signing key is certHash_secret2_secret1", "[secrets]") {
  const secrets::SigningKeySet k{"ch", "s1", "s2"};
  CHECK(crypto::to_string(secrets::derive_signing_key(k)) == "ch_s2_s1");

  const auto v = load_vector();
  const auto key = crypto::to_string(secrets::derive_signing_key(vector_keys(v)));
  CHECK(key.find("_4j8vqy4egph3thd7fdchk435hjudwsey_") != std::string::npos);

  auto other = k;
  other.secret2 = "s3";
  CHECK(secrets::derive_signing_key(other) != secrets::derive_signing_key(k));

  CHECK(code_of([] { secrets::derive_signing_key({"", "a", "b"}); }) == Errc::EmptyKeyPart);
  CHECK(code_of([] { secrets::derive_signing_key({"a", "", "b"}); }) == Errc::EmptyKeyPart);
  CHECK(code_of([] { secrets::derive_signing_key({"a", "b", ""}); }) == Errc::EmptyKeyPart);
}

TEST_CASE("signature matches the recorded reference vector", "[secrets]") {
  const auto v = load_vector();
  const auto key = secrets::derive_signing_key(vector_keys(v));
  const auto& env = v.at("envelope");
  CHECK(protocol::canonicalize(env) == v.at("canonical").get<std::string>());
  const auto sig = secrets::sign_envelope(env, key);
  CHECK(sig == v.at("sign").get<std::string>());
  CHECK(sig.size() == 64);
  CHECK(std::all_of(sig.begin(), sig.end(), [](char c) { return std::isdigit(c) || (c >= 'a' && c <= 'f'); }));

  auto signed_env = env;
  signed_env["sign"] = sig;
  CHECK(secrets::verify_envelope(signed_env, key));
  // the sign field itself never feeds the canonical string
  CHECK(protocol::canonicalize(signed_env) == v.at("canonical").get<std::string>());
}

TEST_CASE("signature ignores field order", "[secrets]") {
  const auto v = load_vector();
  const auto key = secrets::derive_signing_key(vector_keys(v));
  const auto& env = v.at("envelope");
  std::vector<std::pair<std::string, json>> fields;
  for (const auto& [k, val] : env.items()) fields.emplace_back(k, val);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t i = fields.size() - 1; i > 0; --i) std::swap(fields[i], fields[rng.below(i + 1)]);
    json ordered = json::object();
    for (const auto& [k, val] : fields) ordered[k] = val;
    CHECK(secrets::sign_envelope(ordered, key) == v.at("sign").get<std::string>());
  }
}

TEST_CASE("any single-field change breaks verification", "[secrets]") {
  const auto v = load_vector();
  const auto key = secrets::derive_signing_key(vector_keys(v));
  auto env = v.at("envelope");
  env["sign"] = secrets::sign_envelope(env, key);
  for (const auto& [name, value] : v.at("envelope").items()) {
    auto tampered = env;
    if (value.is_string()) {
      auto s = value.get<std::string>();
      s[0] = s[0] == 'x' ? 'y' : 'x';
      tampered[name] = s;
    } else {
      tampered[name] = value.get<std::int64_t>() + 1;
    }
    CHECK_FALSE(secrets::verify_envelope(tampered, key));
  }
  auto extra = env;
  extra["extraField"] = "1";
  CHECK_FALSE(secrets::verify_envelope(extra, key));

  auto wrong_key = vector_keys(v);
  wrong_key.secret2[0] = 'z';
  CHECK_FALSE(secrets::verify_envelope(env, secrets::derive_signing_key(wrong_key)));

  auto unsigned_env = env;
  unsigned_env.erase("sign");
  CHECK(code_of([&] { secrets::verify_envelope(unsigned_env, key); }) == Errc::MissingSign);
  CHECK(code_of([&] { secrets::verify_envelope(json::array(), key); }) == Errc::MissingSign);
}

TEST_CASE("postData seal opens the recorded vector", "[secrets]") {
  const auto v = load_vector();
  const auto key = secrets::derive_signing_key(vector_keys(v));
  const auto& s = v.at("seal");
  const auto opened = secrets::open_postdata(s.at("sealed").get<std::string>(), key);
  CHECK(crypto::to_string(opened) == s.at("plaintext").get<std::string>());
  const auto raw = crypto::base64_decode(s.at("sealed").get<std::string>());
  CHECK(crypto::hex_encode(std::span(raw).first(12)) == s.at("nonce_hex").get<std::string>());
}

TEST_CASE("seal round trips and authenticates", "[secrets]") {
  const auto key = secrets::derive_signing_key({"ch", "s1", "s2"});
  Rng rng(10);
  for (std::size_t len : {0u, 1u, 15u, 16u, 17u, 1000u, 65536u}) {
    std::vector<std::uint8_t> p(len);
    rng.fill(p);
    const auto sealed = secrets::seal_postdata(p, key, rng);
    const auto raw = crypto::base64_decode(sealed);
    CHECK(raw.size() == 12 + len + 16);
    CHECK(secrets::open_postdata(sealed, key) == p);
  }

  const auto sealed = secrets::seal_postdata(crypto::as_bytes("{\"uid\":\"user-1\"}"), key, rng);
  CHECK(secrets::seal_postdata(crypto::as_bytes("{\"uid\":\"user-1\"}"), key, rng) != sealed);
  const auto raw = crypto::base64_decode(sealed);
  int rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    auto bad = raw;
    const auto at = rng.below(bad.size());
    bad[at] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    try {
      secrets::open_postdata(crypto::base64_encode(bad), key);
    } catch (const Error& e) {
      rejected += e.code() == Errc::AuthFailure;
    }
  }
  CHECK(rejected == 1000);

  const auto other = secrets::derive_signing_key({"ch", "s1", "s3"});
  CHECK(code_of([&] { secrets::open_postdata(sealed, other); }) == Errc::AuthFailure);
  CHECK(code_of([&] { secrets::open_postdata("not base64!", key); }) == Errc::BadEncoding);
  CHECK(code_of([&] { secrets::open_postdata("AAAA", key); }) == Errc::BadEncoding);
}

TEST_CASE("stego round trip over keys and image sizes", "[secrets][stego]") {
  Rng rng(2021);
  const std::vector<std::pair<int, int>> sizes{{100, 75}, {33, 41}, {320, 240}};
  int recovered = 0;
  for (const auto& [w, h] : sizes) {
    const auto cover = bmp::Image::generate(w, h, rng);
    for (int i = 0; i < 100; ++i) {
      const stego::Record rec{{lower_alnum(rng, 32)}};
      const auto seed = rng.alnum(20);
      const auto stego_img = stego::embed(cover, seed, rec);
      REQUIRE(stego_img.bytes().size() == cover.bytes().size());
      CHECK(std::equal(cover.header().begin(), cover.header().end(), stego_img.header().begin()));
      CHECK(stego_img.width() == w);
      CHECK(stego_img.height() == h);
      int max_delta = 0;
      for (std::size_t b = 0; b < cover.bytes().size(); ++b)
        max_delta = std::max(max_delta, std::abs(int(cover.bytes()[b]) - int(stego_img.bytes()[b])));
      CHECK(max_delta <= 1);
      const auto ex = stego::extract(stego_img, seed);
      recovered += ex.record == rec;
      CHECK(ex.seed_hash == crc32_reference(seed));
    }
  }
  CHECK(recovered == 300);
}

TEST_CASE("stego records with several keys and at capacity", "[secrets][stego]") {
  Rng rng(5);
  const auto cover = bmp::Image::generate(40, 30, rng);
  const stego::Record multi{{"alpha", std::string(64, 'k'), "z"}};
  CHECK(stego::extract(stego::embed(cover, "seed", multi), "seed").record == multi);

  // 40x30x3 = 3600 pixel bytes hold a record of at most 449 bytes
  std::vector<std::string> keys(6, std::string(64, 'a'));
  keys.push_back(std::string(55, 'b'));
  REQUIRE(stego::serialize({keys}).size() == 449);
  const stego::Record full{keys};
  CHECK(stego::extract(stego::embed(cover, "s", full), "s").record == full);

  keys.back().push_back('c');
  CHECK(code_of([&] { stego::embed(cover, "s", {keys}); }) == Errc::InsufficientCapacity);
  CHECK(code_of([&] { stego::embed(bmp::Image::generate(3, 3, rng), "s", {{"abc"}}); }) ==
        Errc::InsufficientCapacity);
  CHECK(code_of([] { stego::serialize({}); }) == Errc::InvalidLength);
  CHECK(code_of([] { stego::serialize({{std::string(65, 'x')}}); }) == Errc::InvalidLength);
}

TEST_CASE("wrong seed or clean image gives MagicMismatch", "[secrets][stego]") {
  Rng rng(6);
  const auto cover = bmp::Image::generate(100, 75, rng);
  const auto img = stego::embed(cover, "right-seed", {{lower_alnum(rng, 32)}});
  CHECK(code_of([&] { stego::extract(img, "wrong-seed"); }) == Errc::MagicMismatch);
  CHECK(code_of([&] { stego::extract(cover, "right-seed"); }) == Errc::MagicMismatch);
}

TEST_CASE("only 24-bit uncompressed bitmaps are accepted", "[secrets][stego]") {
  Rng rng(7);
  const auto img = bmp::Image::generate(8, 8, rng);
  CHECK(bmp::Image::parse(img.bytes()).bytes() == img.bytes());
  auto bpp32 = img.bytes();
  bpp32[28] = 32;
  CHECK(code_of([&] { bmp::Image::parse(bpp32); }) == Errc::NotUncompressed24Bit);
  auto rle = img.bytes();
  rle[30] = 1;
  CHECK(code_of([&] { bmp::Image::parse(rle); }) == Errc::NotUncompressed24Bit);
  auto sig = img.bytes();
  sig[0] = 'X';
  CHECK(code_of([&] { bmp::Image::parse(sig); }) == Errc::NotUncompressed24Bit);
  CHECK(code_of([&] { bmp::Image::parse(std::vector<std::uint8_t>(20, 0)); }) == Errc::NotUncompressed24Bit);
  auto truncated = img.bytes();
  truncated.resize(truncated.size() - 10);
  CHECK(code_of([&] { bmp::Image::parse(truncated); }) == Errc::NotUncompressed24Bit);
}

TEST_CASE("bfOffBits is honoured", "[secrets][stego]") {
  Rng rng(8);
  const auto img = bmp::Image::generate(10, 10, rng);
  // insert 16 bytes of colour table padding between the headers and pixels
  auto file = img.bytes();
  const auto off = img.pixel_offset();
  file.insert(file.begin() + static_cast<std::ptrdiff_t>(off), 16, 0xEE);
  const std::uint32_t new_off = static_cast<std::uint32_t>(off + 16);
  for (int i = 0; i < 4; ++i) file[10 + i] = static_cast<std::uint8_t>(new_off >> (8 * i));
  const auto shifted = bmp::Image::parse(file);
  CHECK(shifted.pixel_offset() == new_off);
  CHECK(std::equal(shifted.pixels().begin(), shifted.pixels().end(), img.pixels().begin()));
  const auto out = stego::embed(shifted, "seed", {{"abc"}});
  CHECK(std::equal(out.bytes().begin(), out.bytes().begin() + new_off, file.begin()));
  CHECK(stego::extract(out, "seed").record.keys[0] == "abc");
}

TEST_CASE("fixture image yields secret2 and a well-formed report", "[secrets][stego]") {
  const std::string path = std::string(PROVLAB_FIXTURES) + "/secret2.bmp";
  const auto img = bmp::Image::read(path);
  const auto ex = stego::extract(img, "8c4wxjarqdtnuju4wut5");
  REQUIRE(ex.record.keys.size() == 1);
  const auto& key = ex.record.keys[0];
  CHECK(key == "4j8vqy4egph3thd7fdchk435hjudwsey");
  CHECK(std::regex_match(key, std::regex("[a-z0-9]{32}")));

  const auto v = load_vector();
  CHECK(ex.seed_hash == crc32_reference("8c4wxjarqdtnuju4wut5"));
  CHECK(ex.seed_hash == v.at("crc32").at("value").get<std::uint32_t>());

  const auto report = stego::format_report("secret2.bmp", img.bytes().size(), ex);
  std::vector<std::string> lines;
  std::istringstream in(report);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 6);
  CHECK(lines[0] == "opening: secret2.bmp");
  CHECK(lines[1] == "read 22554 bytes");
  CHECK(lines[2] == "str hash: 0x97508b70");
  CHECK(lines[3] == "keys_cnt: 1");
  CHECK(std::regex_match(lines[4], std::regex(R"(\[0\] offs = 0x[0-9a-f]{8})")));
  CHECK(lines[5] == "[KEY] [0] str: 4j8vqy4egph3thd7fdchk435hjudwsey");
}
