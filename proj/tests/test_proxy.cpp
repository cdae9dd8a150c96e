#include <regex>

#include "catch_amalgamated.hpp"
#include "provlab/error.hpp"
#include "provlab/scenarios.hpp"

using namespace provlab;
using nlohmann::json;

namespace {

template <class F>
Error error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an error");
  return Error(Errc::Io);
}

struct World {
  explicit World(std::uint64_t seed, proxy::Policy policy = {}) : tb(seed), gw(tb.add_proxy(std::move(policy))) {}

  device::Device& device(const std::string& id) {
    auto& d = tb.add_device(id, gw.endpoint());
    d.start_pairing(tb.home.ssid);
    return d;
  }

  scenario::Testbed tb;
  proxy::Gateway& gw;
};

}  // namespace

TEST_CASE("virtual network allocation", "[proxy]") {
  World w(1);
  auto& b = w.tb.sim.broker();
  const auto a = w.gw.allocate_virtual_network("plug-a");
  const auto c = w.gw.allocate_virtual_network("plug-c");
  CHECK(std::regex_match(a.ssid, std::regex("vdev-[0-9a-f]{4}")));
  CHECK(a.passphrase.size() == 16);
  CHECK(a.ssid != c.ssid);
  CHECK(a.passphrase != c.passphrase);
  CHECK(b.network(a.ssid).members == std::set<std::string>{"edge-proxy"});
  CHECK(error_of([&] { w.gw.allocate_virtual_network("plug-a"); }).code() == Errc::AlreadyAssigned);

  const auto plan = w.gw.plan().to_json();
  CHECK(plan.at("plug-a").at("ssid") == a.ssid);
  CHECK(plan.at("plug-c").at("passphrase") == c.passphrase);
  CHECK(w.gw.plan().true_home == w.tb.home.ssid);
  for (const auto& [_, asg] : w.gw.plan().assignments) CHECK(asg.ssid != w.tb.home.ssid);

  // a device on one network hears nothing from the other
  auto x = b.register_endpoint("x", netsim::Role::device);
  auto y = b.register_endpoint("y", netsim::Role::device);
  b.join(x, a.ssid, a.passphrase);
  b.join(y, c.ssid, c.passphrase);
  const std::vector<std::uint8_t> frame(20, netsim::kFillerByte);
  for (int i = 0; i < 50; ++i) b.broadcast(x, dpl::kPort, frame);
  CHECK(b.drain(y).empty());
  for (const auto& e : b.capture().snapshot())
    if (e.kind == netsim::ChannelKind::deliver) CHECK(e.dst != "y");
}

TEST_CASE("isolated provisioning keeps the home network out of the cloud", "[proxy]") {
  World w(2);
  auto& d = w.device("plug-1");
  const auto out = w.gw.provision_isolated("plug-1");
  CHECK(out.device_id == "plug-1");
  CHECK(d.phase() == device::Phase::Registered);
  const auto& asg = w.gw.plan().assignments.at("plug-1");
  CHECK(d.joined_ssid() == asg.ssid);
  CHECK(w.tb.sim.broker().memberships(d.endpoint()) == std::vector<std::string>{asg.ssid});

  const auto fp = w.tb.cloud.stored_footprint("plug-1");
  CHECK(fp.ssid == asg.ssid);
  CHECK(fp.passphrase == asg.passphrase);
  const auto dump = w.tb.cloud.registry().to_json().dump();
  CHECK(dump.find(w.tb.home.ssid) == std::string::npos);
  CHECK(dump.find(w.tb.home.passphrase) == std::string::npos);
}

TEST_CASE("stale token ends in BindRejected", "[proxy]") {
  World w(3);
  w.device("plug-1");
  const auto token = w.gw.relay_app("tuya.m.token.get", json::object()).at("token").get<std::string>();
  w.tb.sim.clock().advance(protocol::kTokenTtlSeconds + 1);
  const auto e = error_of([&] { w.gw.provision_isolated("plug-1", token); });
  CHECK(e.code() == Errc::BindRejected);
  CHECK(e.detail() == "Expired");
  CHECK(w.gw.bind_verdicts().at(token).at("success") == false);
}

TEST_CASE("policy filter and redaction", "[proxy]") {
  proxy::Policy p;
  p.allowed_actions = {"tuya.m.token.get"};
  p.redact_fields = {"lat", "lon"};
  World w(4, p);
  const auto sent_before = w.gw.uplink().sent().size();
  const auto audit_before = w.tb.cloud.audit().size();
  const auto e = error_of([&] { w.gw.relay_app("m.device.status", {{"devId", "x"}}); });
  CHECK(e.code() == Errc::PolicyDenied);
  CHECK(w.gw.uplink().sent().size() == sent_before);
  CHECK(w.tb.cloud.audit().size() == audit_before);
  std::size_t streams = 0;
  for (const auto& en : w.tb.sim.broker().capture().snapshot()) streams += en.src == "edge-proxy-wan";
  CHECK(streams == 0);

  const auto r = w.gw.relay_app("tuya.m.token.get", json::object());
  CHECK(r.at("token").get<std::string>().size() == 32);
  const auto audit = w.tb.cloud.audit();
  REQUIRE(audit.size() == audit_before + 1);
  CHECK(audit.back().verified);
  CHECK(audit.back().envelope.at("lat") == "redacted");
  CHECK(audit.back().envelope.at("lon") == "redacted");
  CHECK(audit.back().envelope.at("bundleId") == w.tb.vendor.app.bundle_id);
}

TEST_CASE("upstream failures surface as UpstreamRejected", "[proxy]") {
  World w(5);
  w.tb.sim.broker().set_online(w.tb.cloud.endpoint(), false);
  const auto e = error_of([&] { w.gw.relay_app("tuya.m.token.get", json::object()); });
  CHECK(e.code() == Errc::UpstreamRejected);
  CHECK(e.detail() == "Unreachable");
}

TEST_CASE("proxied control matches direct control", "[proxy]") {
  const std::vector<json> sets{{{"power", "on"}}, {{"brightness", 12}}, {{"power", "off"}}, {{"brightness", 100}}};

  scenario::Testbed direct(6);
  auto& dd = direct.add_device("bulb");
  dd.start_pairing(direct.home.ssid);
  const auto t = direct.phone.acquire_token(direct.cloud.endpoint());
  direct.phone.provision(direct.cloud.endpoint(), {direct.home.ssid, direct.home.passphrase, t.value});

  World w(6);
  auto& pd = w.device("bulb");
  w.gw.provision_isolated("bulb");

  for (const auto& set : sets) {
    const auto a = direct.phone.control_device(direct.cloud.endpoint(), "bulb", set);
    const auto b = w.gw.control("bulb", set);
    CHECK(a == b);
    CHECK(dd.attributes() == pd.attributes());
  }
  for (const auto& a : w.tb.cloud.audit()) CHECK(a.verified);
}

TEST_CASE("local control works without the cloud", "[proxy]") {
  World w(7);
  auto& d = w.device("plug-1");
  w.gw.provision_isolated("plug-1");
  w.gw.control("plug-1", {{"power", "on"}});
  CHECK(d.attributes().power);

  w.tb.sim.broker().set_online(w.tb.cloud.endpoint(), false);
  CHECK(error_of([&] { w.gw.control("plug-1", {{"power", "off"}}); }).code() == Errc::UpstreamRejected);
  const auto st = w.gw.local_control("plug-1", {{"power", "off"}});
  CHECK(st.at("power") == "off");
  CHECK_FALSE(d.attributes().power);

  CHECK(error_of([&] { w.gw.local_control("ghost", {{"power", "on"}}); }).code() == Errc::DeviceOffline);
  CHECK(error_of([&] { w.gw.local_control("plug-1", {{"brightness", 150}}); }).code() == Errc::UnknownCommand);

  auto p = w.gw.policy();
  p.local_control = false;
  w.gw.set_policy(p);
  CHECK(error_of([&] { w.gw.local_control("plug-1", {{"power", "on"}}); }).code() == Errc::PolicyDenied);
  CHECK_FALSE(d.attributes().power);
}

TEST_CASE("policy files", "[proxy]") {
  const auto p = proxy::Policy::load(std::string(PROVLAB_FIXTURES) + "/policy.json");
  CHECK(p.allowed_actions.size() == 4);
  CHECK(p.redact_fields == std::set<std::string>{"lat", "lon"});
  CHECK(p.local_control);
  CHECK(proxy::Policy::from_json(p.to_json()).to_json() == p.to_json());

  for (const char* f : {"sign", "bundleId", "a", "postData"})
    CHECK(error_of([&] { proxy::Policy::from_json({{"redact_fields", {f}}}); }).code() == Errc::BadRequest);
  CHECK(error_of([] { proxy::Policy::from_json({{"allowed_actions", 3}}); }).code() == Errc::BadRequest);
  CHECK(error_of([] { proxy::Policy::load("/nonexistent/policy.json"); }).code() == Errc::Io);

  const auto defaults = proxy::Policy::from_json(json::object());
  CHECK(defaults.allowed_actions.size() == 4);
  CHECK(defaults.redact_fields.empty());
  CHECK(defaults.local_control);
}
