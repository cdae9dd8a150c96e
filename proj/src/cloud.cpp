#include "provlab/cloud.hpp"

#include "provlab/envelope.hpp"
#include "provlab/error.hpp"
#include "provlab/secrets.hpp"

namespace provlab::cloud {

using nlohmann::json;
using protocol::DeviceFrame;
using protocol::FrameKind;

Cloud::Cloud(netsim::Broker& broker, const SimClock& clock, const netsim::EndpointId& self, std::uint64_t seed,
             std::string region)
    : broker_(broker), clock_(clock), self_(self), region_(std::move(region)), rng_(seed) {
  broker_.listen(self_, protocol::kAppPort);
  broker_.listen(self_, protocol::kDevicePort);
  broker_.listen(self_, protocol::kDevicePortAlt);
}

void Cloud::add_vendor(const std::string& bundle_id, const secrets::SigningKeySet& keys) {
  std::lock_guard lock(mu_);
  registry_.vendors[bundle_id] = keys;
}

protocol::Registry Cloud::registry() const {
  std::lock_guard lock(mu_);
  return registry_;
}

void Cloud::restore(protocol::Registry registry) {
  std::lock_guard lock(mu_);
  registry_ = std::move(registry);
}

protocol::Footprint Cloud::stored_footprint(const std::string& device_id) const {
  std::lock_guard lock(mu_);
  return protocol::stored_footprint(registry_, device_id);
}

bool Cloud::device_online(const std::string& device_id) const {
  std::lock_guard lock(mu_);
  return device_channels_.contains(device_id);
}

std::vector<AuditEntry> Cloud::audit() const {
  std::lock_guard lock(mu_);
  return audit_;
}

std::vector<BindAttempt> Cloud::binds() const {
  std::lock_guard lock(mu_);
  return binds_;
}

std::map<std::string, int> Cloud::relayed_commands() const {
  std::lock_guard lock(mu_);
  return relayed_commands_;
}

std::map<std::string, int> Cloud::relayed_acks() const {
  std::lock_guard lock(mu_);
  return relayed_acks_;
}

json Cloud::respond(const std::string& bundle_id, bool success, const json& result, const std::string& error) {
  json r = {{"success", success}, {"t", clock_.now()}};
  auto vendor = registry_.vendors.find(bundle_id);
  if (success) {
    const auto key = secrets::derive_signing_key(vendor->second);
    r["result"] = secrets::seal_postdata(crypto::as_bytes(result.dump()), key, rng_);
  } else {
    r["errorCode"] = error;
  }
  // Responses are signed with the same vendor key as requests; a request
  // naming an unknown vendor gets an unsigned refusal.
  if (vendor != registry_.vendors.end())
    r["sign"] = secrets::sign_envelope(r, secrets::derive_signing_key(vendor->second));
  return r;
}

std::optional<json> Cloud::handle_app_request(const json& envelope, Reply deferred) {
  std::lock_guard lock(mu_);
  AuditEntry entry{clock_.now(), "", "", false, "", envelope};
  auto finish = [&](std::optional<json> r) {
    if (r) entry.outcome = (*r)["success"].get<bool>() ? "ok" : (*r)["errorCode"].get<std::string>();
    else entry.outcome = "pending";
    audit_.push_back(entry);
    return r;
  };

  if (!envelope.is_object()) return finish(fail("", "BadRequest"));
  auto str = [&](const char* name) {
    auto it = envelope.find(name);
    return it != envelope.end() && it->is_string() ? it->get<std::string>() : std::string();
  };
  entry.bundle_id = str("bundleId");
  entry.action = str("a");

  auto vendor = registry_.vendors.find(entry.bundle_id);
  if (vendor == registry_.vendors.end()) return finish(fail("", "UnknownBundle"));
  const auto key = secrets::derive_signing_key(vendor->second);

  bool verified = false;
  try {
    verified = secrets::verify_envelope(envelope, key);
  } catch (const Error&) {
    verified = false;  // MissingSign
  }
  entry.verified = verified;
  if (!verified) return finish(fail(entry.bundle_id, "BadSignature"));

  // app metadata: version fields must be present
  if (str("appVersion").empty() || str("sdVersion").empty()) return finish(fail(entry.bundle_id, "BadRequest"));
  if (!protocol::is_registered_action(entry.action)) return finish(fail(entry.bundle_id, "UnknownAction"));

  json post;
  try {
    const auto plain = secrets::open_postdata(str("postData"), key);
    post = json::parse(plain.begin(), plain.end());
    if (!post.is_object()) throw Error(Errc::BadRequest);
  } catch (const std::exception&) {
    return finish(fail(entry.bundle_id, "BadRequest"));
  }

  return finish(dispatch(entry.bundle_id, entry.action, str("requestId"), post, std::move(deferred)));
}

std::optional<json> Cloud::dispatch(const std::string& bundle_id, const std::string& action,
                                    const std::string& request_id, const json& post, Reply deferred) {
  const std::string uid = post.value("uid", "");
  if (uid.empty()) return fail(bundle_id, "BadRequest");

  if (action == protocol::kActionTokenGet) {
    auto t = protocol::make_token(rng_, post.value("region", region_), bundle_id, uid, clock_.now());
    while (registry_.tokens.contains(t.value)) t.value = rng_.alnum(protocol::kTokenLength);
    registry_.tokens[t.value] = t;
    return respond(bundle_id, true, {{"token", t.value}, {"region", t.region}, {"expireTime", protocol::kTokenTtlSeconds}},
                   "");
  }

  auto owned_device = [&](const std::string& device_id) -> const protocol::DeviceRecord* {
    auto it = registry_.devices.find(device_id);
    if (it == registry_.devices.end() || it->second.user_id != uid || it->second.bundle_id != bundle_id) return nullptr;
    return &it->second;
  };
  auto device_view = [&](const protocol::DeviceRecord& d) {
    return json{{"devId", d.device_id}, {"online", device_channels_.contains(d.device_id)}, {"status", d.status}};
  };

  if (action == protocol::kActionBind || (action == protocol::kActionStatus && post.contains("token"))) {
    const std::string token = post.value("token", "");
    const auto* t = registry_.find_token(token);
    if (!t) return fail(bundle_id, "Unknown");
    if (t->bundle_id != bundle_id) return fail(bundle_id, "VendorMismatch");
    if (t->user_id != uid) return fail(bundle_id, "UserMismatch");
    if (!t->bound) {
      if (action == protocol::kActionBind) return fail(bundle_id, "NotBound");
      return respond(bundle_id, true, {{"bound", false}}, "");
    }
    auto view = device_view(registry_.devices.at(t->device_id));
    view["bound"] = true;
    return respond(bundle_id, true, view, "");
  }

  if (action == protocol::kActionStatus) {
    const auto* d = owned_device(post.value("devId", ""));
    if (!d) return fail(bundle_id, "UnknownDevice");
    return respond(bundle_id, true, device_view(*d), "");
  }

  // m.device.control
  const std::string device_id = post.value("devId", "");
  if (!owned_device(device_id)) return fail(bundle_id, "UnknownDevice");
  if (!post.contains("set") || !post["set"].is_object()) return fail(bundle_id, "BadRequest");
  auto channel = device_channels_.find(device_id);
  if (channel == device_channels_.end()) return fail(bundle_id, "DeviceOffline");
  if (request_id.empty() || pending_.contains(request_id)) return fail(bundle_id, "BadRequest");
  if (!deferred) return fail(bundle_id, "BadRequest");

  pending_[request_id] = Pending{bundle_id, device_id, std::move(deferred)};
  ++relayed_commands_[request_id];
  send_frame(channel->second, DeviceFrame{FrameKind::command, std::nullopt, device_id,
                                          {{"requestId", request_id}, {"set", post["set"]}}});
  return std::nullopt;
}

DeviceFrame Cloud::handle_bind(const DeviceFrame& frame) {
  std::lock_guard lock(mu_);
  if (frame.kind != FrameKind::bind || !frame.token || frame.device_id.empty())
    throw Error(Errc::MalformedFrame, "bind frame needs token and device_id");
  const std::string bundle = frame.payload.value("bundle_id", "");
  const auto verdict = protocol::cloud_token_check(registry_, *frame.token, clock_.now(), bundle, std::nullopt);

  BindAttempt attempt{clock_.now(), frame.device_id, *frame.token, verdict.accepted(), ""};
  DeviceFrame ack{FrameKind::ack, std::nullopt, frame.device_id, {{"success", verdict.accepted()}}};
  if (verdict.accepted() && registry_.devices.contains(frame.device_id)) {
    // one device, one binding
    attempt.accepted = false;
    attempt.reason = "AlreadyBound";
  } else if (!verdict.accepted()) {
    attempt.reason = std::string(protocol::to_string(*verdict.reject));
  }

  if (attempt.accepted) {
    auto& token = registry_.tokens.at(*frame.token);
    token.bound = true;
    token.device_id = frame.device_id;
    protocol::DeviceRecord rec;
    rec.device_id = frame.device_id;
    rec.user_id = token.user_id;
    rec.bundle_id = token.bundle_id;
    rec.token = token.value;
    rec.ssid = frame.payload.value("ssid", "");
    rec.passphrase = frame.payload.value("passphrase", "");
    if (frame.payload.contains("status") && frame.payload["status"].is_object()) rec.status = frame.payload["status"];
    registry_.devices[frame.device_id] = std::move(rec);
  } else {
    ack.payload = {{"success", false}, {"reason", attempt.reason}};
  }
  binds_.push_back(std::move(attempt));
  return ack;
}

void Cloud::send_frame(netsim::StreamId id, const DeviceFrame& f) {
  try {
    broker_.write(id, self_, encode_frame(f));
  } catch (const Error&) {
    // the device went away; its session is dropped when the close arrives
  }
}

void Cloud::on_app_data(netsim::StreamId id, AppSession& s, std::span<const std::uint8_t> bytes) {
  s.parser.feed(bytes);
  auto reply_on = [this, id](json body) {
    http::Response resp;
    resp.headers["Content-Type"] = "application/json";
    resp.body = body.dump();
    try {
      broker_.write(id, self_, http::serialize(resp));
    } catch (const Error&) {
      // client hung up before the answer arrived
    }
  };
  try {
    while (auto req = s.parser.next()) {
      if (req->method != "POST" || req->path != "/api.json") {
        http::Response resp{404, "Not Found", {}, ""};
        broker_.write(id, self_, http::serialize(resp));
        continue;
      }
      json envelope;
      try {
        envelope = json::parse(req->body);
      } catch (const json::exception&) {
        envelope = nullptr;
      }
      if (auto r = handle_app_request(envelope, reply_on)) reply_on(std::move(*r));
    }
  } catch (const Error&) {
    http::Response resp{400, "Bad Request", {}, ""};
    broker_.write(id, self_, http::serialize(resp));
    broker_.close(id, self_);
  }
}

void Cloud::on_device_data(netsim::StreamId id, DeviceSession& s, std::span<const std::uint8_t> bytes) {
  s.reader.feed(bytes);
  while (true) {
    std::optional<DeviceFrame> frame;
    try {
      frame = s.reader.next();
    } catch (const Error&) {
      continue;  // malformed frames are dropped; the reader has resynced
    }
    if (!frame) break;

    switch (frame->kind) {
      case FrameKind::bind: {
        DeviceFrame ack;
        try {
          ack = handle_bind(*frame);
        } catch (const Error&) {
          ack = DeviceFrame{FrameKind::ack, std::nullopt, frame->device_id,
                            {{"success", false}, {"reason", "MalformedFrame"}}};
        }
        if (ack.payload.value("success", false)) {
          std::lock_guard lock(mu_);
          s.device_id = frame->device_id;
          device_channels_[frame->device_id] = id;
        }
        send_frame(id, ack);
        break;
      }
      case FrameKind::status: {
        std::lock_guard lock(mu_);
        if (s.device_id.empty() || s.device_id != frame->device_id) break;
        if (auto it = registry_.devices.find(s.device_id); it != registry_.devices.end())
          if (frame->payload.contains("status")) it->second.status = frame->payload["status"];
        break;
      }
      case FrameKind::ack: {
        Pending p;
        json reply;
        {
          std::lock_guard lock(mu_);
          const std::string rid = frame->payload.value("requestId", "");
          auto it = pending_.find(rid);
          if (it == pending_.end() || it->second.device_id != s.device_id) break;
          p = std::move(it->second);
          pending_.erase(it);
          ++relayed_acks_[rid];
          if (frame->payload.value("ok", false)) {
            auto& rec = registry_.devices.at(p.device_id);
            if (frame->payload.contains("status")) rec.status = frame->payload["status"];
            reply = respond(p.bundle_id, true, {{"devId", p.device_id}, {"status", rec.status}}, "");
          } else {
            reply = fail(p.bundle_id, frame->payload.value("error", "DeviceError"));
          }
        }
        p.reply(std::move(reply));
        break;
      }
      case FrameKind::command:
        break;  // devices do not command the cloud
    }
  }
}

bool Cloud::poll() {
  auto events = broker_.drain(self_);
  for (auto& ev : events) {
    auto* se = std::get_if<netsim::StreamEvent>(&ev);
    if (!se) continue;
    switch (se->kind) {
      case netsim::StreamEvent::Kind::opened:
        if (se->port == protocol::kAppPort)
          app_sessions_[se->stream] = AppSession{{}, se->peer};
        else
          device_sessions_[se->stream] = DeviceSession{};
        break;
      case netsim::StreamEvent::Kind::data:
        if (auto it = app_sessions_.find(se->stream); it != app_sessions_.end())
          on_app_data(se->stream, it->second, se->bytes);
        else if (auto dt = device_sessions_.find(se->stream); dt != device_sessions_.end())
          on_device_data(se->stream, dt->second, se->bytes);
        break;
      case netsim::StreamEvent::Kind::closed: {
        app_sessions_.erase(se->stream);
        auto dt = device_sessions_.find(se->stream);
        if (dt != device_sessions_.end()) {
          std::lock_guard lock(mu_);
          auto ch = device_channels_.find(dt->second.device_id);
          if (ch != device_channels_.end() && ch->second == se->stream) device_channels_.erase(ch);
          device_sessions_.erase(dt);
        }
        break;
      }
    }
  }
  // Channels can also die from our side (the cloud going offline closes
  // them without telling us), so reconcile with the broker.
  std::vector<Pending> orphaned;
  {
    std::lock_guard lock(mu_);
    for (auto it = device_channels_.begin(); it != device_channels_.end();) {
      if (broker_.stream_open(it->second)) {
        ++it;
        continue;
      }
      device_sessions_.erase(it->second);
      for (auto p = pending_.begin(); p != pending_.end();) {
        if (p->second.device_id == it->first) {
          orphaned.push_back(std::move(p->second));
          p = pending_.erase(p);
        } else {
          ++p;
        }
      }
      it = device_channels_.erase(it);
    }
  }
  for (auto& p : orphaned) {
    json reply;
    {
      std::lock_guard lock(mu_);
      reply = fail(p.bundle_id, "DeviceOffline");
    }
    p.reply(std::move(reply));
  }
  return !events.empty() || !orphaned.empty();
}

}  // namespace provlab::cloud
