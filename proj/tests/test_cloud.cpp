#include <filesystem>
#include <thread>
#include <unistd.h>

#include "catch_amalgamated.hpp"
#include "provlab/crypto.hpp"
#include "provlab/error.hpp"
#include "provlab/frame.hpp"
#include "provlab/scenarios.hpp"

using namespace provlab;
using nlohmann::json;
using protocol::DeviceFrame;
using protocol::FrameKind;

namespace {

json open_result(const json& resp, const secrets::SigningKeySet& keys) {
  const auto plain = secrets::open_postdata(resp.at("result").get<std::string>(), secrets::derive_signing_key(keys));
  return json::parse(plain.begin(), plain.end());
}

DeviceFrame bind_frame(const std::string& device, const std::string& token, const std::string& bundle = "com.xyz.smart") {
  return {FrameKind::bind, token, device, {{"bundle_id", bundle}, {"ssid", "vdev-7f3a"}, {"passphrase", "pw"}}};
}

std::size_t bound_tokens(const protocol::Registry& r) {
  std::size_t n = 0;
  for (const auto& [_, t] : r.tokens) n += t.bound;
  return n;
}

// Provisions `id` on the home network with a fresh token.
device::Device& register_device(scenario::Testbed& tb, const std::string& id) {
  auto& d = tb.add_device(id);
  d.start_pairing(tb.home.ssid);
  const auto token = tb.phone.acquire_token(tb.cloud.endpoint());
  tb.phone.provision(tb.cloud.endpoint(), {tb.home.ssid, tb.home.passphrase, token.value});
  return d;
}

}  // namespace

TEST_CASE("token.get returns a sealed, signed result", "[cloud]") {
  scenario::Testbed tb(1);
  auto& api = tb.phone.api();
  const auto env = api.envelope("tuya.m.token.get", json::object());
  const auto resp = tb.cloud.handle_app_request(env);
  REQUIRE(resp);
  CHECK(resp->at("success") == true);
  CHECK(secrets::verify_envelope(*resp, secrets::derive_signing_key(tb.vendor.keys)));
  CHECK(resp->at("result").is_string());
  const auto result = open_result(*resp, tb.vendor.keys);
  CHECK(result.at("token").get<std::string>().size() == 32);
  CHECK(result.at("region") == "EU");
  const auto reg = tb.cloud.registry();
  const auto& t = reg.tokens.at(result.at("token").get<std::string>());
  CHECK(t.issued_at == tb.sim.clock().now());
  CHECK(t.user_id == "user-1");
  CHECK(t.bundle_id == "com.xyz.smart");
  CHECK_FALSE(t.bound);

  const auto audit = tb.cloud.audit();
  REQUIRE(audit.size() == 1);
  CHECK(audit[0].verified);
  CHECK(audit[0].outcome == "ok");
}

TEST_CASE("rejections leave the registry untouched", "[cloud]") {
  scenario::Testbed tb(2);
  auto& api = tb.phone.api();
  tb.cloud.handle_app_request(api.envelope("tuya.m.token.get", json::object()));
  const auto before = tb.cloud.registry().digest();

  auto reject = [&](const json& env) {
    const auto r = tb.cloud.handle_app_request(env);
    REQUIRE(r);
    CHECK(r->at("success") == false);
    return r->at("errorCode").get<std::string>();
  };

  auto tampered = api.envelope("tuya.m.token.get", json::object());
  tampered["lon"] = "-89.000000000000";
  CHECK(reject(tampered) == "BadSignature");

  auto unsigned_env = api.make_fields("tuya.m.token.get", json::object());
  CHECK(reject(unsigned_env) == "BadSignature");

  auto other_vendor = api.make_fields("tuya.m.token.get", json::object());
  other_vendor["bundleId"] = "com.unknown.app";
  api.sign(other_vendor);
  CHECK(reject(other_vendor) == "UnknownBundle");

  auto bad_action = api.make_fields("tuya.m.device.delete", json::object());
  api.sign(bad_action);
  CHECK(reject(bad_action) == "UnknownAction");

  auto no_meta = api.make_fields("tuya.m.token.get", json::object());
  no_meta.erase("appVersion");
  api.sign(no_meta);
  CHECK(reject(no_meta) == "BadRequest");

  auto garbage_post = api.make_fields("tuya.m.token.get", json::object());
  garbage_post["postData"] = "AAAA";
  api.sign(garbage_post);
  CHECK(reject(garbage_post) == "BadRequest");

  CHECK(reject(json::array()) == "BadRequest");
  CHECK(tb.cloud.registry().digest() == before);

  for (const auto& a : tb.cloud.audit())
    if (a.outcome == "BadSignature") CHECK_FALSE(a.verified);
}

TEST_CASE("random single-field tampering is always caught", "[cloud]") {
  scenario::Testbed tb(3);
  auto& api = tb.phone.api();
  const auto before = tb.cloud.registry().digest();
  Rng rng(33);
  int rejected = 0;
  for (int i = 0; i < 200; ++i) {
    auto env = api.envelope("tuya.m.token.get", json::object());
    std::vector<std::string> names;
    for (auto it = env.begin(); it != env.end(); ++it)
      if (it.key() != "sign") names.push_back(it.key());
    const auto& name = names[rng.below(names.size())];
    if (env[name].is_string()) {
      auto s = env[name].get<std::string>();
      const auto at = rng.below(s.size());
      s[at] = s[at] == 'Q' ? 'R' : 'Q';
      env[name] = s;
    } else {
      env[name] = env[name].get<std::int64_t>() + 1 + static_cast<std::int64_t>(rng.below(100));
    }
    const auto r = tb.cloud.handle_app_request(env);
    rejected += r && r->at("success") == false;
  }
  CHECK(rejected == 200);
  CHECK(tb.cloud.registry().digest() == before);
}

TEST_CASE("bind verdicts", "[cloud]") {
  scenario::Testbed tb(4);
  const auto token = tb.phone.acquire_token(tb.cloud.endpoint());

  auto ack = tb.cloud.handle_bind(bind_frame("plug-1", tb.rng.alnum(32)));
  CHECK(ack.payload.at("success") == false);
  CHECK(ack.payload.at("reason") == "Unknown");

  ack = tb.cloud.handle_bind(bind_frame("plug-1", token.value, "com.abc.home"));
  CHECK(ack.payload.at("reason") == "VendorMismatch");

  ack = tb.cloud.handle_bind(bind_frame("plug-1", token.value));
  CHECK(ack.payload.at("success") == true);
  CHECK(tb.cloud.stored_footprint("plug-1").ssid == "vdev-7f3a");

  ack = tb.cloud.handle_bind(bind_frame("plug-2", token.value));
  CHECK(ack.payload.at("reason") == "AlreadyBound");
  ack = tb.cloud.handle_bind(bind_frame("plug-1", token.value));
  CHECK(ack.payload.at("reason") == "AlreadyBound");

  const auto second = tb.phone.acquire_token(tb.cloud.endpoint());
  ack = tb.cloud.handle_bind(bind_frame("plug-1", second.value));
  CHECK(ack.payload.at("reason") == "AlreadyBound");
  CHECK_FALSE(tb.cloud.registry().tokens.at(second.value).bound);

  CHECK_THROWS_AS(tb.cloud.handle_bind({FrameKind::bind, std::nullopt, "plug-3", json::object()}), Error);
  CHECK_THROWS_AS(tb.cloud.handle_bind({FrameKind::status, token.value, "plug-3", json::object()}), Error);
  CHECK_THROWS_AS(tb.cloud.stored_footprint("plug-9"), Error);

  const auto reg = tb.cloud.registry();
  CHECK(bound_tokens(reg) == reg.devices.size());
}

TEST_CASE("concurrent binds of one token admit exactly one device", "[cloud]") {
  scenario::Testbed tb(5);
  const auto token = tb.phone.acquire_token(tb.cloud.endpoint());
  std::atomic<int> accepted{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&, i] {
      const auto ack = tb.cloud.handle_bind(bind_frame("plug-" + std::to_string(i), token.value));
      accepted += ack.payload.at("success").get<bool>();
    });
  for (auto& t : threads) t.join();
  CHECK(accepted == 1);
  CHECK(tb.cloud.registry().devices.size() == 1);
}

TEST_CASE("control commands are relayed once and acknowledged once", "[cloud]") {
  scenario::Testbed tb(6);
  auto& d = register_device(tb, "bulb-1");
  REQUIRE(d.phase() == device::Phase::Registered);
  CHECK(tb.cloud.device_online("bulb-1"));

  const std::vector<json> sets{{{"power", "on"}}, {{"brightness", 30}}, {{"power", "off"}, {"brightness", 90}}};
  for (const auto& set : sets) {
    const auto status = tb.phone.control_device(tb.cloud.endpoint(), "bulb-1", set);
    for (const auto& [k, v] : set.items()) CHECK(status.at(k) == v);
  }
  const auto cmds = tb.cloud.relayed_commands();
  const auto acks = tb.cloud.relayed_acks();
  CHECK(cmds.size() == sets.size());
  CHECK(acks.size() == sets.size());
  for (const auto& [rid, n] : cmds) {
    CHECK(n == 1);
    CHECK(acks.at(rid) == 1);
  }
  CHECK(d.attributes() == device::Attributes{false, 90});

  // status reflects the last ack
  const auto st = tb.phone.api().call(tb.cloud.endpoint(), "m.device.status", {{"devId", "bulb-1"}});
  CHECK(st.at("status").at("brightness") == 90);

  // bad command surfaces the device's refusal, nothing changes
  CHECK_THROWS_AS(tb.phone.control_device(tb.cloud.endpoint(), "bulb-1", {{"brightness", 150}}), Error);
  CHECK(d.attributes() == device::Attributes{false, 90});
}

TEST_CASE("cloud registry survives persist and restore", "[cloud]") {
  scenario::Testbed tb(7);
  register_device(tb, "plug-a");
  register_device(tb, "plug-b");
  register_device(tb, "plug-c");
  const auto reg = tb.cloud.registry();
  REQUIRE(reg.devices.size() == 3);
  CHECK(bound_tokens(reg) == 3);

  const auto path = std::filesystem::temp_directory_path() / ("provlab-cloud-" + std::to_string(::getpid()) + ".json");
  reg.persist(path);
  scenario::Testbed other(8);
  other.cloud.restore(protocol::Registry::restore(path));
  CHECK(other.cloud.registry() == reg);
  CHECK(other.cloud.stored_footprint("plug-b").ssid == tb.home.ssid);
  std::filesystem::remove(path);
}
