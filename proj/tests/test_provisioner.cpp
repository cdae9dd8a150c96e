#include "catch_amalgamated.hpp"
#include "provlab/envelope.hpp"
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

}  // namespace

TEST_CASE("hard-coded endpoint table", "[provisioner]") {
  using V = std::vector<std::string>;
  CHECK(app::hardcoded_endpoints("IN") == V{"13.234.164.70", "13.234.09.49"});
  CHECK(app::hardcoded_endpoints("AZ") == V{"35.167.213.203", "52.27.05.79"});
  CHECK(app::hardcoded_endpoints("EU") == V{"52.29.0.171", "35.156.160.91"});
  CHECK(app::hardcoded_endpoints("AY") == V{"162.14.14.134"});
  CHECK(app::hardcoded_endpoints("US").empty());
  CHECK(app::hardcoded_endpoints("").empty());

  app::Resolver r;
  r.set_dns("EU", {"10.0.0.1"});
  CHECK(r.resolve("EU", true) == V{"10.0.0.1"});
  CHECK(r.resolve("EU", false) == V{"52.29.0.171", "35.156.160.91"});
  CHECK(r.resolve("AY", true) == V{"162.14.14.134"});
}

TEST_CASE("endpoint resolution falls back in table order", "[provisioner]") {
  Simulation sim;
  auto& b = sim.broker();
  auto first = b.register_endpoint("eu-1", netsim::Role::cloud);
  auto second = b.register_endpoint("eu-2", netsim::Role::cloud);
  auto ay = b.register_endpoint("ay-1", netsim::Role::cloud);
  auto dns = b.register_endpoint("eu-dns", netsim::Role::cloud);
  b.bind_address("52.29.0.171", first);
  b.bind_address("35.156.160.91", second);
  b.bind_address("162.14.14.134", ay);
  b.bind_address("10.0.0.1", dns);
  app::Resolver r;
  r.set_dns("EU", {"10.0.0.1"});

  CHECK(app::resolve_cloud_endpoint(b, r, "EU", false) == first);
  CHECK(app::resolve_cloud_endpoint(b, r, "EU", true) == dns);
  CHECK(app::resolve_cloud_endpoint(b, r, "AY", false) == ay);
  b.set_online(first, false);
  CHECK(app::resolve_cloud_endpoint(b, r, "EU", false) == second);
  b.set_online(second, false);
  CHECK(error_of([&] { app::resolve_cloud_endpoint(b, r, "EU", false); }).code() == Errc::Unreachable);
  CHECK(error_of([&] { app::resolve_cloud_endpoint(b, r, "XX", false); }).code() == Errc::UnknownRegion);
  // IN is in the table but nothing answers at those labels here
  CHECK(error_of([&] { app::resolve_cloud_endpoint(b, r, "IN", false); }).code() == Errc::Unreachable);
}

TEST_CASE("acquiring a token", "[provisioner]") {
  scenario::Testbed tb(1);
  const auto t = tb.phone.acquire_token(tb.cloud.endpoint());
  CHECK(t.value.size() == 32);
  CHECK(t.issued_at == tb.sim.clock().now());
  CHECK(tb.cloud.registry().tokens.at(t.value).issued_at == t.issued_at);

  const auto& env = tb.phone.api().sent().back();
  CHECK(env.at("a") == "tuya.m.token.get");
  CHECK(env.at("bundleId") == tb.vendor.app.bundle_id);
  CHECK(env.at("clientId") == tb.vendor.app.client_id);
  CHECK(env.at("sign").get<std::string>().size() == 64);
  for (auto name : protocol::kEnvelopeFields) CHECK(env.contains(std::string(name)));

  auto wrong = tb.vendor.app;
  wrong.keys.secret2[0] = wrong.keys.secret2[0] == 'a' ? 'b' : 'a';
  auto ep = tb.sim.broker().register_endpoint("other-phone", netsim::Role::app);
  app::Provisioner bad(tb.sim, ep, wrong, 5);
  const auto e = error_of([&] { bad.acquire_token(tb.cloud.endpoint()); });
  CHECK(e.code() == Errc::CloudRejected);
  CHECK(e.detail() == "BadSignature");

  tb.sim.broker().set_online(tb.cloud.endpoint(), false);
  CHECK(error_of([&] { tb.phone.acquire_token(tb.cloud.endpoint()); }).code() == Errc::Unreachable);
}

TEST_CASE("provisioning on the home network", "[provisioner]") {
  scenario::Testbed tb(2);
  auto& d = tb.add_device("bulb-1");
  d.start_pairing(tb.home.ssid);
  const auto t = tb.phone.acquire_token(tb.cloud.endpoint());
  const auto out = tb.phone.provision(tb.cloud.endpoint(), {tb.home.ssid, tb.home.passphrase, t.value});
  CHECK(out.device_id == "bulb-1");
  CHECK(out.elapsed <= app::kProvisionTimeout);
  CHECK(d.phase() == device::Phase::Registered);

  // the token on the air is the token the cloud issued
  const auto attempts = scenario::decode_capture(tb.sim.broker().capture().snapshot());
  REQUIRE_FALSE(attempts.empty());
  for (const auto& a : attempts) CHECK(a.fields.token == t.value);

  const auto st = tb.phone.control_device(tb.cloud.endpoint(), "bulb-1", {{"power", "on"}});
  CHECK(st.at("power") == "on");

  // after pairing the phone talks only to the cloud
  for (const auto& e : tb.sim.broker().capture().snapshot()) {
    if (e.src != "phone") continue;
    if (e.kind == netsim::ChannelKind::stream) CHECK(e.dst == tb.cloud.endpoint().id);
    else CHECK(e.port == dpl::kPort);
  }
}

TEST_CASE("provisioning onto a separate network", "[provisioner]") {
  scenario::Testbed tb(3);
  auto& b = tb.sim.broker();
  b.create_network("vdev-7f3a", "Zq81mPwe0LkT5hYx");
  b.join(tb.phone.endpoint(), "vdev-7f3a", "Zq81mPwe0LkT5hYx");
  auto& d = tb.add_device("plug-1");
  d.start_pairing("vdev-7f3a");
  const auto t = tb.phone.acquire_token(tb.cloud.endpoint());
  const auto out =
      tb.phone.provision(tb.cloud.endpoint(), {"vdev-7f3a", "Zq81mPwe0LkT5hYx", t.value}, 5, "vdev-7f3a");
  CHECK(out.device_id == "plug-1");
  CHECK(d.joined_ssid() == "vdev-7f3a");
  CHECK(b.memberships(d.endpoint()) == std::vector<std::string>{"vdev-7f3a"});
  CHECK(tb.cloud.stored_footprint("plug-1").ssid == "vdev-7f3a");
}

TEST_CASE("nobody listening ends in Timeout", "[provisioner]") {
  scenario::Testbed tb(4);
  const auto t = tb.phone.acquire_token(tb.cloud.endpoint());
  const auto start = tb.sim.clock().now();
  const auto e = error_of([&] { tb.phone.provision(tb.cloud.endpoint(), {tb.home.ssid, tb.home.passphrase, t.value}); });
  CHECK(e.code() == Errc::Timeout);
  CHECK(tb.sim.clock().now() - start >= app::kProvisionTimeout);
  CHECK(tb.sim.clock().now() - start <= app::kProvisionTimeout + app::kStatusPollInterval);
}

TEST_CASE("control failures", "[provisioner]") {
  scenario::Testbed tb(5);
  auto& d = tb.add_device("bulb-1");
  d.start_pairing(tb.home.ssid);
  const auto t = tb.phone.acquire_token(tb.cloud.endpoint());
  tb.phone.provision(tb.cloud.endpoint(), {tb.home.ssid, tb.home.passphrase, t.value});

  CHECK(error_of([&] { tb.phone.control_device(tb.cloud.endpoint(), "nope", {{"power", "on"}}); }).code() ==
        Errc::DeviceOffline);
  tb.sim.broker().set_online(tb.cloud.endpoint(), false);
  CHECK(error_of([&] { tb.phone.control_device(tb.cloud.endpoint(), "bulb-1", {{"power", "on"}}); }).code() ==
        Errc::CloudUnreachable);
  // phone and bulb still share the home network
  CHECK(tb.sim.broker().is_member(tb.phone.endpoint(), tb.home.ssid));
  CHECK(tb.sim.broker().is_member(d.endpoint(), tb.home.ssid));
  CHECK_FALSE(d.attributes().power);
}

TEST_CASE("app config loads secret2 out of the bitmap", "[provisioner]") {
  const auto c = app::load_app_config(std::string(PROVLAB_FIXTURES) + "/app.json");
  CHECK(c.bundle_id == "com.xyz.smart");
  CHECK(c.client_id == "tt3advw3as8se94muvt9");
  CHECK(c.region == "EU");
  CHECK(c.keys.secret1 == "vay9g59g9g99qf3rtqptmc3emhkanwkx");
  CHECK(c.keys.secret2 == "4j8vqy4egph3thd7fdchk435hjudwsey");
  CHECK(error_of([] { app::load_app_config("/nonexistent/app.json"); }).code() == Errc::Io);
}
