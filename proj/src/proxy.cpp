#include "provlab/proxy.hpp"

#include <algorithm>
#include <fstream>

#include "provlab/envelope.hpp"
#include "provlab/error.hpp"

namespace provlab::proxy {

using nlohmann::json;
using protocol::DeviceFrame;
using protocol::FrameKind;

Policy Policy::from_json(const json& j) {
  Policy p;
  try {
    if (j.contains("allowed_actions")) p.allowed_actions = j["allowed_actions"].get<std::set<std::string>>();
    if (j.contains("redact_fields")) p.redact_fields = j["redact_fields"].get<std::set<std::string>>();
    if (j.contains("local_control")) p.local_control = j["local_control"].get<bool>();
  } catch (const json::exception& e) {
    throw Error(Errc::BadRequest, std::string("policy: ") + e.what());
  }
  for (const auto& f : p.redact_fields)
    if (f == "sign" || f == "bundleId" || f == "a" || f == "postData")
      throw Error(Errc::BadRequest, "policy cannot redact " + f);
  return p;
}

Policy Policy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(Errc::BadRequest, std::string("policy: ") + e.what());
  }
}

json Policy::to_json() const {
  return {{"allowed_actions", allowed_actions}, {"redact_fields", redact_fields}, {"local_control", local_control}};
}

json IsolationPlan::to_json() const {
  json j = json::object();
  for (const auto& [id, a] : assignments) j[id] = {{"ssid", a.ssid}, {"passphrase", a.passphrase}};
  return j;
}

Gateway::Gateway(Simulation& sim, const std::string& id, const netsim::VirtualNetwork& home, app::AppConfig config,
                 netsim::EndpointId cloud, Policy policy, std::uint64_t seed)
    : sim_(sim),
      self_(sim.broker().register_endpoint(id, netsim::Role::proxy)),
      home_(home),
      cloud_(std::move(cloud)),
      uplink_(sim, sim.broker().register_endpoint(id + "-wan", netsim::Role::proxy), std::move(config), seed ^ 0x5bd1e995),
      policy_(std::move(policy)),
      rng_(seed) {
  sim_.broker().join(self_, home_.ssid, home_.passphrase);
  sim_.broker().listen(self_, protocol::kDevicePort);
  sim_.broker().listen(self_, protocol::kDevicePortAlt);
  plan_.true_home = home_.ssid;
}

netsim::VirtualNetwork Gateway::allocate_virtual_network(const std::string& device_id) {
  if (plan_.assignments.contains(device_id)) throw Error(Errc::AlreadyAssigned, device_id);
  auto& broker = sim_.broker();
  const auto taken = broker.network_ssids();
  std::string ssid;
  do {
    ssid = "vdev-" + rng_.hex(4);
  } while (std::ranges::find(taken, ssid) != taken.end());
  std::string passphrase;
  bool unique = false;
  while (!unique) {
    passphrase = rng_.alnum(16);
    unique = true;
    for (const auto& [_, a] : plan_.assignments) unique &= a.passphrase != passphrase;
  }
  auto net = broker.create_network(ssid, passphrase);
  broker.join(self_, ssid, passphrase);
  plan_.assignments[device_id] = {ssid, passphrase};
  return net;
}

json Gateway::relay_app(std::string_view action, const json& post) {
  if (!policy_.allowed_actions.contains(std::string(action)))
    throw Error(Errc::PolicyDenied, std::string(action));
  auto envelope = uplink_.make_fields(action, post);
  // redact first, then sign what is actually sent
  for (const auto& field : policy_.redact_fields)
    if (envelope.contains(field)) envelope[field] = kRedacted;
  uplink_.sign(envelope);
  try {
    return uplink_.call_envelope(cloud_, envelope);
  } catch (const Error& e) {
    throw Error(Errc::UpstreamRejected, e.code() == Errc::Unreachable ? "Unreachable" : e.detail());
  }
}

app::ProvisionOutcome Gateway::provision_isolated(const std::string& device_id, std::optional<std::string> token,
                                                  int rounds) {
  if (!plan_.assignments.contains(device_id)) allocate_virtual_network(device_id);
  const auto& a = plan_.assignments.at(device_id);
  if (!token) token = relay_app(protocol::kActionTokenGet, json::object()).at("token").get<std::string>();

  const dpl::Credentials creds{a.ssid, a.passphrase, *token};
  const auto seq = dpl::encode(creds, rounds);
  for (int len : seq.flatten())
    sim_.broker().broadcast(self_, home_.ssid, dpl::kPort,
                            std::vector<std::uint8_t>(static_cast<std::size_t>(len), netsim::kFillerByte));

  const auto start = sim_.clock().now();
  while (true) {
    sim_.run_until_idle();
    if (auto v = bind_verdicts_.find(*token); v != bind_verdicts_.end() && !v->second.value("success", false))
      throw Error(Errc::BindRejected, v->second.value("reason", std::string("unknown")));
    try {
      const auto r = relay_app(protocol::kActionStatus, {{"token", *token}});
      if (r.value("bound", false) && r.value("online", false))
        return {r.at("devId").get<std::string>(), sim_.clock().now() - start};
    } catch (const Error& e) {
      if (e.code() != Errc::UpstreamRejected) throw;
    }
    if (sim_.clock().now() - start >= app::kProvisionTimeout) throw Error(Errc::Timeout, device_id);
    sim_.clock().advance(app::kStatusPollInterval);
  }
}

json Gateway::control(const std::string& device_id, const json& set) {
  return relay_app(protocol::kActionControl, {{"devId", device_id}, {"set", set}}).at("status");
}

json Gateway::local_control(const std::string& device_id, const json& set) {
  if (!policy_.local_control) throw Error(Errc::PolicyDenied, "local control disabled");
  std::optional<netsim::StreamId> down;
  for (const auto& [sid, b] : bridges_)
    if (b.device_id == device_id && sim_.broker().stream_open(sid)) down = sid;
  if (!down) throw Error(Errc::DeviceOffline, device_id);

  const std::string rid = "local-" + rng_.hex(12);
  write(*down, DeviceFrame{FrameKind::command, std::nullopt, device_id, {{"requestId", rid}, {"set", set}}});
  sim_.run_until([&] { return local_replies_.contains(rid); });
  auto it = local_replies_.find(rid);
  if (it == local_replies_.end()) throw Error(Errc::DeviceOffline, device_id + " did not answer");
  const json reply = it->second;
  local_replies_.erase(it);
  if (!reply.value("ok", false)) throw Error(Errc::UnknownCommand, reply.value("error", std::string()));
  return reply.at("status");
}

void Gateway::write(netsim::StreamId s, const DeviceFrame& f) {
  try {
    sim_.broker().write(s, self_, encode_frame(f));
  } catch (const Error&) {
    // the other side is gone; the close event cleans up
  }
}

void Gateway::on_device_frame(netsim::StreamId down, Bridge& b, const DeviceFrame& f) {
  auto& broker = sim_.broker();
  if (f.kind == FrameKind::bind) {
    b.device_id = f.device_id;
    b.token = f.token;
    if (!b.upstream || !broker.stream_open(*b.upstream)) {
      try {
        b.upstream = broker.open_stream(self_, cloud_, protocol::kDevicePort);
        upstream_to_down_[*b.upstream] = down;
      } catch (const Error&) {
        write(down, DeviceFrame{FrameKind::ack, std::nullopt, f.device_id,
                                {{"success", false}, {"reason", "CloudUnreachable"}}});
        return;
      }
    }
  }
  if (f.kind == FrameKind::ack) {
    const std::string rid = f.payload.value("requestId", "");
    if (rid.rfind("local-", 0) == 0) {
      local_replies_[rid] = f.payload;
      return;
    }
  }
  if (b.upstream && broker.stream_open(*b.upstream)) write(*b.upstream, f);
}

void Gateway::on_cloud_frame(netsim::StreamId down, Bridge& b, const DeviceFrame& f) {
  if (f.kind == FrameKind::ack && b.token && !bind_verdicts_.contains(*b.token)) bind_verdicts_[*b.token] = f.payload;
  write(down, f);
}

bool Gateway::poll() {
  auto events = sim_.broker().drain(self_);
  for (auto& ev : events) {
    auto* se = std::get_if<netsim::StreamEvent>(&ev);
    if (!se) continue;  // broadcasts on the home network are not ours to read
    switch (se->kind) {
      case netsim::StreamEvent::Kind::opened:
        bridges_[se->stream];
        break;
      case netsim::StreamEvent::Kind::data: {
        if (auto up = upstream_to_down_.find(se->stream); up != upstream_to_down_.end()) {
          auto bt = bridges_.find(up->second);
          if (bt == bridges_.end()) break;
          bt->second.from_cloud.feed(se->bytes);
          while (true) {
            std::optional<DeviceFrame> f;
            try {
              f = bt->second.from_cloud.next();
            } catch (const Error&) {
              continue;
            }
            if (!f) break;
            on_cloud_frame(up->second, bt->second, *f);
          }
        } else if (auto bt = bridges_.find(se->stream); bt != bridges_.end()) {
          bt->second.from_device.feed(se->bytes);
          while (true) {
            std::optional<DeviceFrame> f;
            try {
              f = bt->second.from_device.next();
            } catch (const Error&) {
              continue;
            }
            if (!f) break;
            on_device_frame(se->stream, bt->second, *f);
          }
        }
        break;
      }
      case netsim::StreamEvent::Kind::closed:
        if (auto up = upstream_to_down_.find(se->stream); up != upstream_to_down_.end()) {
          // cloud went away; the device keeps its channel to us
          if (auto bt = bridges_.find(up->second); bt != bridges_.end()) bt->second.upstream.reset();
          upstream_to_down_.erase(up);
        } else if (auto bt = bridges_.find(se->stream); bt != bridges_.end()) {
          if (bt->second.upstream) {
            sim_.broker().close(*bt->second.upstream, self_);
            upstream_to_down_.erase(*bt->second.upstream);
          }
          bridges_.erase(bt);
        }
        break;
    }
  }
  return !events.empty();
}

}  // namespace provlab::proxy
