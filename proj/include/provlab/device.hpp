#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provlab/dpl.hpp"
#include "provlab/frame.hpp"
#include "provlab/netsim.hpp"
#include "provlab/simulation.hpp"

namespace provlab::device {

enum class Phase { Unprovisioned, CredsReceived, CredsRejected, WifiJoined, BindPending, Registered, RegisterFailed };

std::string_view to_string(Phase p);

struct Event {
  std::int64_t t = 0;
  std::string device_id;
  Phase phase = Phase::Unprovisioned;
  std::string detail;
};

/// The toy attribute store commands act on.
struct Attributes {
  bool power = false;
  int brightness = 50;

  nlohmann::json to_json() const;
  bool operator==(const Attributes&) const = default;
};

struct Config {
  std::string id;
  std::string bundle_id;           // vendor the firmware belongs to
  netsim::EndpointId cloud;        // where the firmware sends its bind
  int cloud_port = protocol::kDevicePort;
};

/// An EZ-mode device. It listens for provisioning broadcasts, checks only
/// the token length, joins whatever network it decoded, binds to its cloud
/// and then obeys commands from the cloud channel or from anyone who can
/// reach its local port.
class Device : public Actor {
 public:
  Device(netsim::Broker& broker, const SimClock& clock, Config config);

  /// Start listening for provisioning broadcasts on `ssid`.
  void start_pairing(const std::string& ssid);

  const std::string& id() const { return config_.id; }
  const netsim::EndpointId& endpoint() const { return self_; }
  Phase phase() const { return phase_; }
  const std::optional<dpl::Credentials>& credentials() const { return creds_; }
  const Attributes& attributes() const { return attrs_; }
  const std::optional<std::string>& joined_ssid() const { return joined_; }
  const dpl::DecoderState& decoder() const { return decoder_; }

  const std::vector<Event>& events() const { return events_; }
  /// Newline-delimited JSON {t, device_id, phase, detail}.
  std::string events_jsonl() const;

  /// Cloud-channel command handling. Throws NotRegistered or UnknownCommand.
  protocol::DeviceFrame handle_command(const protocol::DeviceFrame& frame);
  /// The open local port: any reachable peer is obeyed once the device is on
  /// a network. Throws NotRegistered before that, UnknownCommand on bad input.
  protocol::DeviceFrame local_command(const protocol::DeviceFrame& frame);

  bool poll() override;

 private:
  void enter(Phase p, std::string detail);
  void on_credentials();
  protocol::DeviceFrame apply(const protocol::DeviceFrame& frame);
  void answer(netsim::StreamId stream, const protocol::DeviceFrame& frame, bool local);
  void on_stream_data(netsim::StreamId stream, std::span<const std::uint8_t> bytes);

  netsim::Broker& broker_;
  const SimClock& clock_;
  Config config_;
  netsim::EndpointId self_;

  Phase phase_ = Phase::Unprovisioned;
  dpl::DecoderState decoder_;
  std::optional<std::string> pairing_ssid_;
  std::optional<dpl::Credentials> creds_;
  std::optional<std::string> joined_;
  std::optional<netsim::StreamId> cloud_stream_;
  std::map<netsim::StreamId, protocol::FrameReader> readers_;
  Attributes attrs_;
  std::vector<Event> events_;
};

}  // namespace provlab::device
