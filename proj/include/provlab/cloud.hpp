#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provlab/frame.hpp"
#include "provlab/http_lite.hpp"
#include "provlab/netsim.hpp"
#include "provlab/registry.hpp"
#include "provlab/simulation.hpp"

namespace provlab::cloud {

/// One app request as the cloud saw it.
struct AuditEntry {
  std::int64_t t = 0;
  std::string action;
  std::string bundle_id;
  bool verified = false;
  std::string outcome;  // "ok" or an error code
  nlohmann::json envelope;
};

struct BindAttempt {
  std::int64_t t = 0;
  std::string device_id;
  std::string token;
  bool accepted = false;
  std::string reason;
};

/// Vendor cloud. Serves signed app requests on port 443 and device frames
/// on 6668 (and 1883). Control commands are relayed to the device over its
/// open channel and answered once the device acks.
class Cloud : public Actor {
 public:
  using Reply = std::function<void(nlohmann::json)>;

  Cloud(netsim::Broker& broker, const SimClock& clock, const netsim::EndpointId& self, std::uint64_t seed,
        std::string region = "EU");

  const netsim::EndpointId& endpoint() const { return self_; }

  void add_vendor(const std::string& bundle_id, const secrets::SigningKeySet& keys);

  /// Handles one envelope. Returns the response unless the action waits on
  /// a device, in which case `deferred` is called later.
  std::optional<nlohmann::json> handle_app_request(const nlohmann::json& envelope, Reply deferred = {});

  /// Runs the token check for a bind frame and returns the ack to send.
  protocol::DeviceFrame handle_bind(const protocol::DeviceFrame& frame);

  protocol::Registry registry() const;
  void restore(protocol::Registry registry);
  protocol::Footprint stored_footprint(const std::string& device_id) const;
  bool device_online(const std::string& device_id) const;

  std::vector<AuditEntry> audit() const;
  std::vector<BindAttempt> binds() const;
  /// Command frames sent to devices, keyed by requestId.
  std::map<std::string, int> relayed_commands() const;
  std::map<std::string, int> relayed_acks() const;

  bool poll() override;

 private:
  struct AppSession {
    http::RequestParser parser;
    netsim::EndpointId peer;
  };
  struct DeviceSession {
    protocol::FrameReader reader;
    std::string device_id;  // set after a successful bind
  };
  struct Pending {
    std::string bundle_id;
    std::string device_id;
    Reply reply;
  };

  nlohmann::json respond(const std::string& bundle_id, bool success, const nlohmann::json& result,
                         const std::string& error);
  nlohmann::json fail(const std::string& bundle_id, const std::string& error) {
    return respond(bundle_id, false, nullptr, error);
  }
  std::optional<nlohmann::json> dispatch(const std::string& bundle_id, const std::string& action,
                                         const std::string& request_id, const nlohmann::json& post,
                                         Reply deferred);
  void on_app_data(netsim::StreamId id, AppSession& s, std::span<const std::uint8_t> bytes);
  void on_device_data(netsim::StreamId id, DeviceSession& s, std::span<const std::uint8_t> bytes);
  void send_frame(netsim::StreamId id, const protocol::DeviceFrame& f);

  netsim::Broker& broker_;
  const SimClock& clock_;
  netsim::EndpointId self_;
  std::string region_;

  mutable std::recursive_mutex mu_;
  Rng rng_;
  protocol::Registry registry_;
  std::vector<AuditEntry> audit_;
  std::vector<BindAttempt> binds_;
  std::map<netsim::StreamId, AppSession> app_sessions_;
  std::map<netsim::StreamId, DeviceSession> device_sessions_;
  std::map<std::string, netsim::StreamId> device_channels_;
  std::map<std::string, Pending> pending_;
  std::map<std::string, int> relayed_commands_;
  std::map<std::string, int> relayed_acks_;
};

}  // namespace provlab::cloud
