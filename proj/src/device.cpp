#include "provlab/device.hpp"

#include "provlab/error.hpp"
#include "provlab/token.hpp"

namespace provlab::device {

using nlohmann::json;
using protocol::DeviceFrame;
using protocol::FrameKind;

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Unprovisioned: return "Unprovisioned";
    case Phase::CredsReceived: return "CredsReceived";
    case Phase::CredsRejected: return "CredsRejected";
    case Phase::WifiJoined: return "WifiJoined";
    case Phase::BindPending: return "BindPending";
    case Phase::Registered: return "Registered";
    case Phase::RegisterFailed: return "RegisterFailed";
  }
  return "Unprovisioned";
}

json Attributes::to_json() const { return {{"power", power ? "on" : "off"}, {"brightness", brightness}}; }

Device::Device(netsim::Broker& broker, const SimClock& clock, Config config)
    : broker_(broker), clock_(clock), config_(std::move(config)) {
  self_ = broker_.register_endpoint(config_.id, netsim::Role::device);
  events_.push_back({clock_.now(), config_.id, phase_, "power on"});
}

void Device::enter(Phase p, std::string detail) {
  phase_ = p;
  events_.push_back({clock_.now(), config_.id, p, std::move(detail)});
}

std::string Device::events_jsonl() const {
  std::string out;
  for (const auto& e : events_) {
    out += json{{"t", e.t}, {"device_id", e.device_id}, {"phase", to_string(e.phase)}, {"detail", e.detail}}.dump();
    out += '\n';
  }
  return out;
}

void Device::start_pairing(const std::string& ssid) {
  broker_.monitor(self_, ssid);
  pairing_ssid_ = ssid;
  decoder_.reset();
  events_.push_back({clock_.now(), config_.id, phase_, "listening for provisioning on " + ssid});
}

void Device::on_credentials() {
  creds_ = decoder_.fields();
  if (pairing_ssid_) {
    broker_.stop_monitor(self_, *pairing_ssid_);
    pairing_ssid_.reset();
  }
  enter(Phase::CredsReceived, "ssid=" + creds_->ssid);

  if (!protocol::device_token_check(creds_->token)) {
    // the only visible sign is a local indication; nothing goes on the air
    enter(Phase::CredsRejected, "token length " + std::to_string(creds_->token.size()));
    return;
  }

  try {
    broker_.join(self_, creds_->ssid, creds_->passphrase);
  } catch (const Error& e) {
    enter(Phase::RegisterFailed, std::string("WifiJoinFailed: ") + e.what());
    return;
  }
  joined_ = creds_->ssid;
  broker_.listen(self_, protocol::kDevicePort);
  broker_.listen(self_, protocol::kDevicePortAlt);
  enter(Phase::WifiJoined, creds_->ssid);

  try {
    cloud_stream_ = broker_.open_stream(self_, config_.cloud, config_.cloud_port);
  } catch (const Error& e) {
    enter(Phase::RegisterFailed, std::string("CloudUnreachable: ") + e.what());
    return;
  }
  readers_[*cloud_stream_];
  DeviceFrame bind{FrameKind::bind, creds_->token, config_.id,
                   {{"bundle_id", config_.bundle_id},
                    {"ssid", creds_->ssid},
                    {"passphrase", creds_->passphrase},
                    {"status", attrs_.to_json()}}};
  broker_.write(*cloud_stream_, self_, encode_frame(bind));
  enter(Phase::BindPending, "bind sent to " + config_.cloud.id);
}

DeviceFrame Device::apply(const DeviceFrame& frame) {
  if (frame.kind != FrameKind::command) throw Error(Errc::UnknownCommand, "not a command frame");
  const auto& set = frame.payload.contains("set") ? frame.payload["set"] : json();
  if (!set.is_object() || set.empty()) throw Error(Errc::UnknownCommand, "missing set");

  Attributes next = attrs_;
  for (const auto& [key, value] : set.items()) {
    if (key == "power" && value.is_string() && (value == "on" || value == "off")) {
      next.power = value == "on";
    } else if (key == "power" && value.is_boolean()) {
      next.power = value.get<bool>();
    } else if (key == "brightness" && value.is_number_integer() && value.get<int>() >= 0 && value.get<int>() <= 100) {
      next.brightness = value.get<int>();
    } else {
      throw Error(Errc::UnknownCommand, key + "=" + value.dump());
    }
  }
  attrs_ = next;
  return DeviceFrame{FrameKind::ack, std::nullopt, config_.id,
                     {{"requestId", frame.payload.value("requestId", "")}, {"ok", true}, {"status", attrs_.to_json()}}};
}

DeviceFrame Device::handle_command(const DeviceFrame& frame) {
  if (phase_ != Phase::Registered) throw Error(Errc::NotRegistered, std::string(to_string(phase_)));
  return apply(frame);
}

DeviceFrame Device::local_command(const DeviceFrame& frame) {
  if (!joined_) throw Error(Errc::NotRegistered, "not on a network");
  return apply(frame);
}

void Device::answer(netsim::StreamId stream, const DeviceFrame& frame, bool local) {
  DeviceFrame reply;
  try {
    reply = local ? local_command(frame) : handle_command(frame);
    events_.push_back({clock_.now(), config_.id, phase_,
                       std::string(local ? "local" : "cloud") + " command " + frame.payload.value("set", json()).dump()});
  } catch (const Error& e) {
    reply = DeviceFrame{FrameKind::ack, std::nullopt, config_.id,
                        {{"requestId", frame.payload.value("requestId", "")},
                         {"ok", false},
                         {"error", std::string(to_string(e.code()))}}};
  }
  try {
    broker_.write(stream, self_, encode_frame(reply));
  } catch (const Error&) {
    // peer left
  }
}

void Device::on_stream_data(netsim::StreamId stream, std::span<const std::uint8_t> bytes) {
  auto& reader = readers_[stream];
  reader.feed(bytes);
  const bool from_cloud = cloud_stream_ && *cloud_stream_ == stream;
  while (true) {
    std::optional<DeviceFrame> frame;
    try {
      frame = reader.next();
    } catch (const Error&) {
      continue;  // malformed input is ignored
    }
    if (!frame) break;

    if (from_cloud && frame->kind == FrameKind::ack && phase_ == Phase::BindPending) {
      if (frame->payload.value("success", false)) {
        enter(Phase::Registered, "bind accepted");
      } else {
        enter(Phase::RegisterFailed, "cloud rejected: " + frame->payload.value("reason", std::string("unknown")));
        broker_.close(stream, self_);
        cloud_stream_.reset();
      }
    } else if (frame->kind == FrameKind::command) {
      answer(stream, *frame, !from_cloud);
    }
  }
}

bool Device::poll() {
  auto events = broker_.drain(self_);
  for (auto& ev : events) {
    if (auto* dg = std::get_if<netsim::Datagram>(&ev)) {
      if (dg->dst_port != dpl::kPort || phase_ != Phase::Unprovisioned) continue;
      decoder_.feed(static_cast<int>(dg->payload.size()));
      if (decoder_.phase() == dpl::DecoderState::Phase::Complete) {
        on_credentials();
      } else if (decoder_.phase() == dpl::DecoderState::Phase::Failed) {
        events_.push_back({clock_.now(), config_.id, phase_, "checksum conflict, restarting decoder"});
        decoder_.reset();
      }
      continue;
    }
    auto& se = std::get<netsim::StreamEvent>(ev);
    switch (se.kind) {
      case netsim::StreamEvent::Kind::opened:
        readers_[se.stream];
        break;
      case netsim::StreamEvent::Kind::data:
        on_stream_data(se.stream, se.bytes);
        break;
      case netsim::StreamEvent::Kind::closed:
        readers_.erase(se.stream);
        if (cloud_stream_ && *cloud_stream_ == se.stream) {
          cloud_stream_.reset();
          events_.push_back({clock_.now(), config_.id, phase_, "cloud channel closed"});
        }
        break;
    }
  }
  return !events.empty();
}

}  // namespace provlab::device
