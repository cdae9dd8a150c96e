#include "provlab/scenarios.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

#include "provlab/envelope.hpp"
#include "provlab/error.hpp"
#include "provlab/frame.hpp"
#include "provlab/stego.hpp"

namespace provlab::scenario {

using nlohmann::json;
using netsim::CaptureEntry;
using netsim::ChannelKind;
using Entries = std::vector<CaptureEntry>;

Vendor make_vendor(Rng& rng, const std::string& bundle_id, const std::string& user_id) {
  Vendor v;
  v.keys.cert_hash = rng.hex(64);
  v.keys.secret1 = rng.alnum(32);
  v.keys.secret2 = rng.alnum(32);
  v.stego_seed = rng.alnum(20);
  v.image = stego::embed(bmp::Image::generate(100, 75, rng), v.stego_seed, stego::Record{{v.keys.secret2}});

  v.app.bundle_id = bundle_id;
  v.app.client_id = rng.alnum(20);
  v.app.user_id = user_id;
  v.app.keys.cert_hash = v.keys.cert_hash;
  v.app.keys.secret1 = v.keys.secret1;
  v.app.keys.secret2 = stego::extract(v.image, v.stego_seed).record.keys.at(0);
  return v;
}

namespace {

netsim::EndpointId make_cloud_endpoint(Simulation& sim) {
  auto ep = sim.broker().register_endpoint("cloud-eu", netsim::Role::cloud);
  for (const auto& addr : app::hardcoded_endpoints("EU")) sim.broker().bind_address(addr, ep);
  return ep;
}

netsim::VirtualNetwork make_home(Simulation& sim, Rng& rng) {
  return sim.broker().create_network("HomeNet-" + rng.hex(4), rng.alnum(12));
}

netsim::EndpointId make_phone(Simulation& sim, const netsim::VirtualNetwork& home, const std::string& id) {
  auto ep = sim.broker().register_endpoint(id, netsim::Role::app);
  sim.broker().join(ep, home.ssid, home.passphrase);
  return ep;
}

}  // namespace

Testbed::Testbed(std::uint64_t seed, netsim::LossModel loss)
    : sim(netsim::LossModel{loss.drop_prob, loss.dup_prob, seed}),
      rng(seed),
      home(make_home(sim, rng)),
      vendor(make_vendor(rng, "com.xyz.smart")),
      cloud(sim.broker(), sim.clock(), make_cloud_endpoint(sim), rng.next()),
      phone(sim, make_phone(sim, home, "phone"), vendor.app, rng.next()) {
  cloud.add_vendor(vendor.app.bundle_id, vendor.keys);
  sim.add(cloud);
}

device::Device& Testbed::add_device(const std::string& id, std::optional<netsim::EndpointId> bind_to,
                                   std::optional<std::string> bundle_id) {
  devices_.push_back(std::make_unique<device::Device>(
      sim.broker(), sim.clock(),
      device::Config{id, bundle_id.value_or(vendor.app.bundle_id), bind_to.value_or(cloud.endpoint()),
                     protocol::kDevicePort}));
  sim.add(*devices_.back());
  return *devices_.back();
}

proxy::Gateway& Testbed::add_proxy(proxy::Policy policy) {
  if (proxy_) throw Error(Errc::AlreadyAssigned, "proxy already present");
  proxy_ = std::make_unique<proxy::Gateway>(sim, "edge-proxy", home, vendor.app, cloud.endpoint(), std::move(policy),
                                            rng.next());
  sim.add(*proxy_);
  return *proxy_;
}

netsim::EndpointId Testbed::add_intruder(const std::string& id) {
  auto ep = sim.broker().register_endpoint(id, netsim::Role::device);
  sim.broker().join(ep, home.ssid, home.passphrase);
  return ep;
}

bool Report::pass() const {
  return !steps.empty() && std::all_of(steps.begin(), steps.end(), [](const Step& s) { return s.pass; });
}

json Report::to_json() const {
  json j;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["steps"] = json::array();
  for (const auto& s : steps) j["steps"].push_back({{"expect", s.expect}, {"observe", s.observe}, {"pass", s.pass}});
  j["pass"] = pass();
  return j;
}

std::vector<DecodedAttempt> decode_capture(const Entries& entries) {
  // per-listener views first; the sender view only if nobody heard anything
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<int>> delivered, sent;
  std::vector<Key> order;
  for (const auto& e : entries) {
    if (e.port != dpl::kPort) continue;
    if (e.kind == ChannelKind::deliver) {
      Key k{e.ssid, e.src, e.dst};
      if (!delivered.contains(k)) order.push_back(k);
      delivered[k].push_back(static_cast<int>(e.len));
    } else if (e.kind == ChannelKind::broadcast) {
      sent[{e.ssid, e.src, ""}].push_back(static_cast<int>(e.len));
    }
  }
  if (delivered.empty() && sent.empty()) throw Error(Errc::NoProvisioningTraffic);
  auto& views = delivered.empty() ? sent : delivered;
  if (delivered.empty())
    for (const auto& [k, _] : sent) order.push_back(k);

  std::vector<DecodedAttempt> out;
  for (const auto& k : order) {
    dpl::DecoderState dec;
    for (int len : views[k]) {
      dec.feed(len);
      if (dec.phase() == dpl::DecoderState::Phase::Complete) {
        const auto f = *dec.fields();
        // later rounds of the same attempt decode again; report it once
        const bool repeat = !out.empty() && std::get<1>(k) == out.back().sender &&
                            std::get<2>(k) == out.back().listener && f.ssid == out.back().fields.ssid &&
                            f.passphrase == out.back().fields.passphrase && f.token == out.back().fields.token;
        if (!repeat) out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), f});
        dec.reset();
      } else if (dec.phase() == dpl::DecoderState::Phase::Failed) {
        dec.reset();
      }
    }
  }
  return out;
}

namespace {

class Steps {
 public:
  explicit Steps(std::vector<Step>& out) : out_(out) {}
  bool check(std::string expect, std::string observe, bool pass) {
    out_.push_back({std::move(expect), std::move(observe), pass});
    return pass;
  }

 private:
  std::vector<Step>& out_;
};

std::size_t count(const Entries& cap, const std::function<bool(const CaptureEntry&)>& pred) {
  return static_cast<std::size_t>(std::count_if(cap.begin(), cap.end(), pred));
}

std::size_t stream_frames(const Entries& cap, const std::string& src, const std::string& dst,
                          std::int64_t since = 0) {
  return count(cap, [&](const CaptureEntry& e) {
    return e.kind == ChannelKind::stream && e.src == src && (dst.empty() || e.dst == dst) && e.t >= since;
  });
}

/// Device frames carried from `src` to `dst`, reassembled from stream data.
std::vector<protocol::DeviceFrame> frames(const Entries& cap, const std::string& src, const std::string& dst) {
  protocol::FrameReader reader;
  std::vector<protocol::DeviceFrame> out;
  for (const auto& e : cap) {
    if (e.kind != ChannelKind::stream || e.src != src || e.dst != dst) continue;
    if (e.port != protocol::kDevicePort && e.port != protocol::kDevicePortAlt) continue;
    reader.feed(e.data);
    while (auto f = reader.next()) out.push_back(*f);
  }
  return out;
}

std::optional<json> bind_ack(const Entries& cap, const std::string& from, const std::string& device) {
  for (const auto& f : frames(cap, from, device))
    if (f.kind == protocol::FrameKind::ack && f.payload.contains("success")) return std::optional<json>(std::in_place, f.payload);
  return std::nullopt;
}

bool bytes_contain(const std::vector<std::uint8_t>& data, const std::string& needle) {
  return !needle.empty() && std::search(data.begin(), data.end(), needle.begin(), needle.end()) != data.end();
}

std::string phase_of(const device::Device& d) { return std::string(device::to_string(d.phase())); }

std::string heard_token(const Entries& cap, const std::string& sender) {
  try {
    for (const auto& a : decode_capture(cap))
      if (a.sender == sender) return a.fields.token;
  } catch (const Error&) {
  }
  return "";
}

std::string ack_text(const std::optional<json>& ack) { return ack ? ack->dump() : "no ack"; }

// ---------------------------------------------------------------------------

void token_case_1(std::uint64_t seed, netsim::LossModel loss, Report& r) {
  Steps s(r.steps);
  Testbed tb(seed, loss);
  auto& dev = tb.add_device("plug-1");
  dev.start_pairing(tb.home.ssid);
  const auto token = tb.phone.acquire_token(tb.cloud.endpoint());
  const dpl::Credentials creds{tb.home.ssid, tb.home.passphrase, token.value.substr(0, 16)};
  tb.phone.broadcast(dpl::build_raw_payload(creds), dpl::kDefaultRounds);
  tb.sim.run_until_idle();
  tb.sim.clock().advance(app::kProvisionTimeout);
  tb.sim.run_until_idle();

  const auto cap = tb.sim.broker().capture().snapshot();
  r.capture = tb.sim.broker().capture().to_jsonl();
  const auto heard = heard_token(cap, "phone");
  s.check("16-character token on the air", "heard token length " + std::to_string(heard.size()), heard.size() == 16);
  s.check("device rejects the credentials", "phase " + phase_of(dev), dev.phase() == device::Phase::CredsRejected);
  const auto out = count(cap, [&](const CaptureEntry& e) { return e.src == dev.id() && e.kind != ChannelKind::deliver; });
  s.check("no packets generated by the device", std::to_string(out) + " frames from device", out == 0);
  const auto to_cloud = stream_frames(cap, dev.id(), tb.cloud.endpoint().id);
  s.check("0 device->cloud frames", std::to_string(to_cloud) + " device->cloud frames", to_cloud == 0);
}

void run_rejected_bind(Testbed& tb, device::Device& dev, const std::string& token, const std::string& reason,
                       Report& r) {
  Steps s(r.steps);
  bool timed_out = false;
  try {
    tb.phone.provision(tb.cloud.endpoint(), {tb.home.ssid, tb.home.passphrase, token});
  } catch (const Error& e) {
    timed_out = e.code() == Errc::Timeout;
  }
  const auto cap = tb.sim.broker().capture().snapshot();
  r.capture = tb.sim.broker().capture().to_jsonl();
  const auto heard = heard_token(cap, "phone");
  s.check("broadcast token equals the one the app used", heard, heard == token);
  const auto binds = frames(cap, dev.id(), tb.cloud.endpoint().id);
  const bool attempted = std::any_of(binds.begin(), binds.end(), [&](const auto& f) {
    return f.kind == protocol::FrameKind::bind && f.token == token;
  });
  s.check("device attempts the bind", std::to_string(binds.size()) + " device->cloud frames", attempted);
  const auto ack = bind_ack(cap, tb.cloud.endpoint().id, dev.id());
  s.check("cloud rejects with " + reason, ack_text(ack),
          ack && !ack->value("success", true) && ack->value("reason", "") == reason);
  s.check("device ends in RegisterFailed", "phase " + phase_of(dev), dev.phase() == device::Phase::RegisterFailed);
  s.check("app gives up after the polling window", timed_out ? "Timeout" : "no timeout", timed_out);
}

void token_case_2_random(std::uint64_t seed, netsim::LossModel loss, Report& r) {
  Testbed tb(seed, loss);
  auto& dev = tb.add_device("plug-1");
  dev.start_pairing(tb.home.ssid);
  const auto token = tb.rng.alnum(protocol::kTokenLength);
  run_rejected_bind(tb, dev, token, "Unknown", r);
}

void token_case_2_stale(std::uint64_t seed, netsim::LossModel loss, Report& r) {
  Testbed tb(seed, loss);
  auto& dev = tb.add_device("plug-1");
  const auto token = tb.phone.acquire_token(tb.cloud.endpoint());
  tb.sim.clock().advance(protocol::kTokenTtlSeconds + 1);
  dev.start_pairing(tb.home.ssid);
  run_rejected_bind(tb, dev, token.value, "Expired", r);
}

void token_case_3(std::uint64_t seed, netsim::LossModel loss, Report& r) {
  Steps s(r.steps);
  Testbed tb(seed, loss);
  auto& dev = tb.add_device("plug-1");
  dev.start_pairing(tb.home.ssid);
  const auto token = tb.phone.acquire_token(tb.cloud.endpoint());
  std::string bound;
  try {
    bound = tb.phone.provision(tb.cloud.endpoint(), {tb.home.ssid, tb.home.passphrase, token.value}).device_id;
  } catch (const Error& e) {
    bound = std::string(to_string(e.code()));
  }
  const auto cap = tb.sim.broker().capture().snapshot();
  r.capture = tb.sim.broker().capture().to_jsonl();
  const auto heard = heard_token(cap, "phone");
  s.check("broadcast token equals the issued token", heard, heard == token.value);
  const auto ack = bind_ack(cap, tb.cloud.endpoint().id, dev.id());
  s.check("cloud accepts the bind", ack_text(ack), ack && ack->value("success", false));
  s.check("device Registered", "phase " + phase_of(dev), dev.phase() == device::Phase::Registered);
  s.check("app sees the device online", bound, bound == dev.id());
  const auto fp = tb.cloud.stored_footprint(dev.id());
  s.check("cloud stores the home network", fp.ssid, fp.ssid == tb.home.ssid);
}

void replay_defense(std::uint64_t seed, netsim::LossModel loss, Report& r) {
  Steps s(r.steps);
  Testbed tb(seed, loss);
  auto& victim = tb.add_device("plug-1");
  victim.start_pairing(tb.home.ssid);
  const auto token = tb.phone.acquire_token(tb.cloud.endpoint());
  try {
    tb.phone.provision(tb.cloud.endpoint(), {tb.home.ssid, tb.home.passphrase, token.value});
  } catch (const Error&) {
  }
  s.check("victim Registered", "phase " + phase_of(victim), victim.phase() == device::Phase::Registered);
  const auto before = tb.cloud.stored_footprint(victim.id());

  // an intruder that sniffed the broadcast plays the same lengths back
  const auto intruder = tb.add_intruder("intruder");
  auto& clone = tb.add_device("plug-2");
  clone.start_pairing(tb.home.ssid);
  const auto sniffed = tb.sim.broker().capture().snapshot();
  for (const auto& e : sniffed)
    if (e.kind == ChannelKind::broadcast && e.src == "phone" && e.port == dpl::kPort)
      tb.sim.broker().broadcast(intruder, tb.home.ssid, dpl::kPort, std::vector<std::uint8_t>(e.len, netsim::kFillerByte));
  tb.sim.run_until_idle();

  auto cap = tb.sim.broker().capture().snapshot();
  const auto replayed = heard_token(cap, "intruder");
  s.check("replayed broadcast carries the used token", replayed, replayed == token.value);
  const auto ack = bind_ack(cap, tb.cloud.endpoint().id, clone.id());
  s.check("cloud refuses the second bind", ack_text(ack),
          ack && !ack->value("success", true) && ack->value("reason", "") == "AlreadyBound");
  const auto after = tb.cloud.stored_footprint(victim.id());
  s.check("victim record untouched", after.device_id + "@" + after.ssid,
          after.ssid == before.ssid && after.passphrase == before.passphrase);

  // same network, open local port: the intruder simply asks
  const auto since = tb.sim.clock().now();
  const auto stream = tb.sim.broker().open_stream(intruder, victim.endpoint(), protocol::kDevicePort);
  tb.sim.broker().write(stream, intruder,
                        protocol::encode_frame({protocol::FrameKind::command, std::nullopt, victim.id(),
                                                {{"requestId", "hijack-1"}, {"set", {{"power", "on"}, {"brightness", 100}}}}}));
  tb.sim.run_until_idle();
  cap = tb.sim.broker().capture().snapshot();
  r.capture = tb.sim.broker().capture().to_jsonl();
  const auto delivered = stream_frames(cap, "intruder", victim.id(), since);
  s.check("co-resident intruder reaches the device port", std::to_string(delivered) + " frames delivered", delivered > 0);
  const auto replies = frames(cap, victim.id(), "intruder");
  const bool obeyed = std::any_of(replies.begin(), replies.end(), [](const auto& f) {
    return f.kind == protocol::FrameKind::ack && f.payload.value("ok", false) &&
           f.payload["status"].value("brightness", -1) == 100;
  });
  s.check("device obeys the intruder", replies.empty() ? "no reply" : replies.back().payload.dump(), obeyed);
}

std::string dump_cloud_side(const Testbed& tb) {
  std::string all = tb.cloud.registry().to_json().dump();
  for (const auto& a : tb.cloud.audit()) all += a.envelope.dump();
  return all;
}

void isolation_two_devices(std::uint64_t seed, netsim::LossModel loss, Report& r) {
  Steps s(r.steps);
  Testbed tb(seed, loss);
  auto& gw = tb.add_proxy();
  auto& a = tb.add_device("plug-a", gw.endpoint());
  auto& b = tb.add_device("plug-b", gw.endpoint());

  std::map<std::string, std::string> outcome;
  for (auto* d : {&a, &b}) {
    d->start_pairing(tb.home.ssid);
    try {
      outcome[d->id()] = gw.provision_isolated(d->id()).device_id;
    } catch (const Error& e) {
      outcome[d->id()] = std::string(to_string(e.code()));
    }
  }
  for (auto* d : {&a, &b})
    s.check(d->id() + " Registered through its own network", "phase " + phase_of(*d) + ", status " + outcome[d->id()],
            d->phase() == device::Phase::Registered && outcome[d->id()] == d->id());

  const auto& plan = gw.plan().assignments;
  const auto net_a = plan.at(a.id()).ssid, net_b = plan.at(b.id()).ssid;
  s.check("distinct fake networks", net_a + " / " + net_b, net_a != net_b && net_a != tb.home.ssid);
  for (auto* d : {&a, &b}) {
    const auto fp = tb.cloud.stored_footprint(d->id());
    s.check("cloud stores only the fake network for " + d->id(), fp.ssid, fp.ssid == plan.at(d->id()).ssid);
  }

  // compromised device sitting on b's network
  auto rogue = tb.sim.broker().register_endpoint("rogue", netsim::Role::device);
  tb.sim.broker().join(rogue, net_b, plan.at(b.id()).passphrase);
  std::string attempt = "connected";
  try {
    const auto st = tb.sim.broker().open_stream(rogue, a.endpoint(), protocol::kDevicePort);
    tb.sim.broker().write(st, rogue, protocol::encode_frame({protocol::FrameKind::command, std::nullopt, a.id(),
                                                            {{"requestId", "x"}, {"set", {{"power", "on"}}}}}));
  } catch (const Error& e) {
    attempt = std::string(to_string(e.code()));
  }
  const std::vector<std::uint8_t> junk(64, 0x00);
  tb.sim.broker().broadcast(rogue, net_b, protocol::kDevicePort, junk);
  tb.sim.run_until_idle();

  const auto cap = tb.sim.broker().capture().snapshot();
  r.capture = tb.sim.broker().capture().to_jsonl();
  const auto reached = count(cap, [&](const CaptureEntry& e) { return e.src == "rogue" && e.dst == a.id(); });
  s.check("cross-network frames delivered = 0", std::to_string(reached) + " (" + attempt + ")", reached == 0);
  const auto crossed = count(cap, [&](const CaptureEntry& e) {
    return e.kind == ChannelKind::deliver && e.ssid != tb.home.ssid &&
           ((e.src == a.id() && e.dst == b.id()) || (e.src == b.id() && e.dst == a.id()));
  });
  s.check("no deliveries between the two devices", std::to_string(crossed), crossed == 0);

  const auto cloud_side = dump_cloud_side(tb);
  const bool ssid_leaked = cloud_side.find(tb.home.ssid) != std::string::npos;
  const bool pass_leaked = cloud_side.find(tb.home.passphrase) != std::string::npos;
  s.check("home SSID absent from cloud state", ssid_leaked ? "found" : "absent", !ssid_leaked && !pass_leaked);
  const auto wan_leaks = count(cap, [&](const CaptureEntry& e) {
    return e.kind == ChannelKind::stream && e.ssid == "wan" &&
           (bytes_contain(e.data, tb.home.ssid) || bytes_contain(e.data, tb.home.passphrase));
  });
  s.check("home SSID absent from traffic leaving the home", std::to_string(wan_leaks) + " frames", wan_leaks == 0);
}

const std::vector<json> kCommands{
    {{"power", "on"}},
    {{"brightness", 30}},
    {{"power", "off"}, {"brightness", 80}},
    {{"power", true}},
    {{"brightness", 0}},
};

void proxy_transparency(std::uint64_t seed, netsim::LossModel loss, Report& r) {
  Steps s(r.steps);
  Testbed direct(seed, loss);
  auto& d1 = direct.add_device("plug-1");
  d1.start_pairing(direct.home.ssid);
  try {
    const auto t = direct.phone.acquire_token(direct.cloud.endpoint());
    direct.phone.provision(direct.cloud.endpoint(), {direct.home.ssid, direct.home.passphrase, t.value});
  } catch (const Error&) {
  }

  Testbed proxied(seed, loss);
  proxy::Policy policy;
  policy.redact_fields = {"lat", "lon"};
  auto& gw = proxied.add_proxy(policy);
  auto& d2 = proxied.add_device("plug-1", gw.endpoint());
  d2.start_pairing(proxied.home.ssid);
  try {
    gw.provision_isolated(d2.id());
  } catch (const Error&) {
  }
  s.check("both devices Registered", phase_of(d1) + " / " + phase_of(d2),
          d1.phase() == device::Phase::Registered && d2.phase() == device::Phase::Registered);

  for (const auto& cmd : kCommands) {
    json st1, st2;
    try {
      st1 = direct.phone.control_device(direct.cloud.endpoint(), d1.id(), cmd);
    } catch (const Error& e) {
      st1 = std::string(to_string(e.code()));
    }
    try {
      st2 = gw.control(d2.id(), cmd);
    } catch (const Error& e) {
      st2 = std::string(to_string(e.code()));
    }
    s.check("same state for " + cmd.dump(), st1.dump() + " / " + st2.dump(),
            st1 == st2 && d1.attributes() == d2.attributes() && st2.is_object());
  }

  const auto cap = proxied.sim.broker().capture().snapshot();
  r.capture = proxied.sim.broker().capture().to_jsonl();
  const auto cloud_id = proxied.cloud.endpoint().id;
  const auto direct_frames = count(cap, [&](const CaptureEntry& e) {
    return (e.src == cloud_id && e.dst == d2.id()) || (e.src == d2.id() && e.dst == cloud_id);
  });
  const auto via_proxy = frames(cap, cloud_id, gw.endpoint().id).size();
  s.check("cloud and device talk only through the proxy",
          std::to_string(direct_frames) + " direct, " + std::to_string(via_proxy) + " via proxy",
          direct_frames == 0 && via_proxy > 0);

  const auto audit = proxied.cloud.audit();
  const auto verified = std::count_if(audit.begin(), audit.end(), [](const auto& a) { return a.verified; });
  s.check("every proxy envelope verifies at the cloud",
          std::to_string(verified) + "/" + std::to_string(audit.size()),
          !audit.empty() && static_cast<std::size_t>(verified) == audit.size());
  const bool redacted = std::all_of(audit.begin(), audit.end(), [](const auto& a) {
    return a.envelope.value("lat", "") == proxy::kRedacted && a.envelope.value("lon", "") == proxy::kRedacted;
  });
  s.check("location fields redacted before signing", redacted ? "redacted" : "present", redacted);
}

void proxy_offline_control(std::uint64_t seed, netsim::LossModel loss, Report& r) {
  Steps s(r.steps);
  Testbed tb(seed, loss);
  auto& gw = tb.add_proxy();
  auto& dev = tb.add_device("plug-1", gw.endpoint());
  dev.start_pairing(tb.home.ssid);
  try {
    gw.provision_isolated(dev.id());
    gw.control(dev.id(), {{"power", "on"}});
  } catch (const Error&) {
  }
  s.check("device on through the cloud", dev.attributes().to_json().dump(), dev.attributes().power);

  tb.sim.clock().advance(60);
  const auto outage = tb.sim.clock().now();
  tb.sim.broker().set_online(tb.cloud.endpoint(), false);
  tb.sim.run_until_idle();

  std::string via_cloud = "ok";
  try {
    gw.control(dev.id(), {{"power", "off"}});
  } catch (const Error& e) {
    via_cloud = std::string(to_string(e.code())) + ":" + e.detail();
  }
  s.check("cloud path fails while the cloud is down", via_cloud, via_cloud != "ok");

  json local;
  try {
    local = gw.local_control(dev.id(), {{"power", "off"}});
  } catch (const Error& e) {
    local = std::string(to_string(e.code()));
  }
  s.check("local control switches the device off", local.dump(),
          local.is_object() && local.value("power", "") == "off" && !dev.attributes().power);

  const auto cap = tb.sim.broker().capture().snapshot();
  r.capture = tb.sim.broker().capture().to_jsonl();
  const auto cloud_id = tb.cloud.endpoint().id;
  const auto cloud_traffic = count(cap, [&](const CaptureEntry& e) {
    return e.t >= outage && e.kind == ChannelKind::stream && (e.src == cloud_id || e.dst == cloud_id);
  });
  s.check("nothing reaches the cloud after the outage", std::to_string(cloud_traffic), cloud_traffic == 0);
  const auto down = stream_frames(cap, gw.endpoint().id, dev.id(), outage);
  const auto up = stream_frames(cap, dev.id(), gw.endpoint().id, outage);
  s.check("command and ack carried over the proxy channel",
          std::to_string(down) + " down, " + std::to_string(up) + " up", down > 0 && up > 0);
}

void stovepipe_baseline(std::uint64_t seed, netsim::LossModel loss, Report& r) {
  Steps s(r.steps);
  Testbed tb(seed, loss);
  auto& dev = tb.add_device("plug-1");
  dev.start_pairing(tb.home.ssid);
  std::string online = "ok";
  try {
    const auto t = tb.phone.acquire_token(tb.cloud.endpoint());
    tb.phone.provision(tb.cloud.endpoint(), {tb.home.ssid, tb.home.passphrase, t.value});
    tb.phone.control_device(tb.cloud.endpoint(), dev.id(), {{"power", "on"}});
  } catch (const Error& e) {
    online = std::string(to_string(e.code()));
  }
  s.check("control works while the cloud is up", online + ", power " + (dev.attributes().power ? "on" : "off"),
          online == "ok" && dev.attributes().power);

  tb.sim.clock().advance(60);
  const auto outage = tb.sim.clock().now();
  tb.sim.broker().set_online(tb.cloud.endpoint(), false);
  tb.sim.run_until_idle();
  std::string down = "ok";
  try {
    tb.phone.control_device(tb.cloud.endpoint(), dev.id(), {{"power", "off"}});
  } catch (const Error& e) {
    down = std::string(to_string(e.code()));
  }
  s.check("app loses control with the cloud down", down, down == "CloudUnreachable");
  s.check("device state unchanged", dev.attributes().to_json().dump(), dev.attributes().power);

  const auto cap = tb.sim.broker().capture().snapshot();
  r.capture = tb.sim.broker().capture().to_jsonl();
  const auto reached = count(cap, [&](const CaptureEntry& e) { return e.t >= outage && e.dst == dev.id(); });
  s.check("no frame reaches the device after the outage", std::to_string(reached), reached == 0);
}

void multi_vendor(std::uint64_t seed, netsim::LossModel loss, Report& r) {
  Steps s(r.steps);
  Testbed tb(seed, loss);
  auto other = make_vendor(tb.rng, "com.abc.home", "user-2");
  tb.cloud.add_vendor(other.app.bundle_id, other.keys);
  app::Provisioner phone_b(tb.sim, make_phone(tb.sim, tb.home, "phone-b"), other.app, tb.rng.next());

  auto& dev_a = tb.add_device("bulb-a");
  auto& dev_b = tb.add_device("bulb-b", std::nullopt, other.app.bundle_id);
  auto& dev_c = tb.add_device("bulb-c", std::nullopt, other.app.bundle_id);

  auto provision = [&](app::Provisioner& ph, device::Device& d) {
    d.start_pairing(tb.home.ssid);
    try {
      const auto t = ph.acquire_token(tb.cloud.endpoint());
      return ph.provision(tb.cloud.endpoint(), {tb.home.ssid, tb.home.passphrase, t.value}).device_id;
    } catch (const Error& e) {
      return std::string(to_string(e.code()));
    }
  };
  const auto ra = provision(tb.phone, dev_a);
  const auto rb = provision(phone_b, dev_b);
  s.check("vendor A device Registered", ra + " " + phase_of(dev_a), dev_a.phase() == device::Phase::Registered);
  s.check("vendor B device Registered", rb + " " + phase_of(dev_b), dev_b.phase() == device::Phase::Registered);

  // vendor A's token handed to vendor B firmware
  provision(tb.phone, dev_c);
  auto cap = tb.sim.broker().capture().snapshot();
  const auto ack = bind_ack(cap, tb.cloud.endpoint().id, dev_c.id());
  s.check("cross-vendor token refused", ack_text(ack),
          ack && !ack->value("success", true) && ack->value("reason", "") == "VendorMismatch");

  // vendor B's keys cannot speak for vendor A
  const auto digest = tb.cloud.registry().digest();
  auto forged = phone_b.api().make_fields(protocol::kActionTokenGet, json::object());
  forged["bundleId"] = tb.vendor.app.bundle_id;
  phone_b.api().sign(forged);
  std::string code;
  try {
    const auto resp = phone_b.api().send(tb.cloud.endpoint(), forged);
    code = resp.value("errorCode", "accepted");
  } catch (const Error& e) {
    code = std::string(to_string(e.code()));
  }
  cap = tb.sim.broker().capture().snapshot();
  r.capture = tb.sim.broker().capture().to_jsonl();
  const auto refusals = count(cap, [&](const CaptureEntry& e) {
    return e.kind == ChannelKind::stream && e.src == tb.cloud.endpoint().id && e.dst == "phone-b" &&
           bytes_contain(e.data, "BadSignature");
  });
  s.check("foreign keys rejected with BadSignature", code + ", " + std::to_string(refusals) + " refusal on the wire",
          code == "BadSignature" && refusals == 1);
  s.check("registry unchanged by the forgery", tb.cloud.registry().digest().substr(0, 12),
          tb.cloud.registry().digest() == digest);
}

using Runner = void (*)(std::uint64_t, netsim::LossModel, Report&);

const std::map<std::string, Runner>& registry() {
  static const std::map<std::string, Runner> r{
      {"token-case-1", token_case_1},
      {"token-case-2-random", token_case_2_random},
      {"token-case-2-stale", token_case_2_stale},
      {"token-case-3", token_case_3},
      {"replay-defense", replay_defense},
      {"isolation-two-devices", isolation_two_devices},
      {"proxy-transparency", proxy_transparency},
      {"proxy-offline-control", proxy_offline_control},
      {"stovepipe-baseline", stovepipe_baseline},
      {"multi-vendor", multi_vendor},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& names() {
  static const std::vector<std::string> n = [] {
    std::vector<std::string> out;
    for (const auto& [k, _] : registry()) out.push_back(k);
    return out;
  }();
  return n;
}

Report run(const std::string& name, std::uint64_t seed, netsim::LossModel loss) {
  auto it = registry().find(name);
  if (it == registry().end()) throw Error(Errc::UnknownScenario, name);
  Report r;
  r.scenario = name;
  r.seed = seed;
  it->second(seed, loss, r);
  return r;
}

}  // namespace provlab::scenario
