#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "provlab/api_client.hpp"
#include "provlab/frame.hpp"
#include "provlab/provisioner.hpp"

namespace provlab::proxy {

struct Policy {
  std::set<std::string> allowed_actions{"tuya.m.token.get", "m.device.bind", "m.device.control", "m.device.status"};
  std::set<std::string> redact_fields;
  bool local_control = true;

  static Policy from_json(const nlohmann::json& j);
  static Policy load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

inline constexpr std::string_view kRedacted = "redacted";

struct Assignment {
  std::string ssid;
  std::string passphrase;
};

struct IsolationPlan {
  std::string true_home;
  std::map<std::string, Assignment> assignments;

  /// {device_id: {ssid, passphrase}}
  nlohmann::json to_json() const;
};

/// Edge gateway between the home and the vendor cloud. Toward the cloud it
/// acts as the app (signed requests from the extracted keys) and as each
/// device (bind and status frames); toward devices it acts as the cloud. It
/// also hands every device its own network.
class Gateway : public Actor {
 public:
  Gateway(Simulation& sim, const std::string& id, const netsim::VirtualNetwork& home, app::AppConfig config,
          netsim::EndpointId cloud, Policy policy, std::uint64_t seed);

  /// Device-side endpoint; devices must be configured to bind here.
  const netsim::EndpointId& endpoint() const { return self_; }
  app::ApiClient& uplink() { return uplink_; }
  const Policy& policy() const { return policy_; }
  void set_policy(Policy p) { policy_ = std::move(p); }
  const IsolationPlan& plan() const { return plan_; }

  /// "vdev-" + 4 hex digits with a 16-character passphrase; the gateway joins
  /// it. Throws AlreadyAssigned.
  netsim::VirtualNetwork allocate_virtual_network(const std::string& device_id);

  /// App role: policy check, redaction, signing, upstream call. Returns the
  /// opened result. Throws PolicyDenied or UpstreamRejected.
  nlohmann::json relay_app(std::string_view action, const nlohmann::json& post);

  /// Onboards `device_id` onto its own network with a token the gateway
  /// obtains itself (or `token`, when given). Throws BindRejected or Timeout.
  app::ProvisionOutcome provision_isolated(const std::string& device_id,
                                           std::optional<std::string> token = std::nullopt,
                                           int rounds = dpl::kDefaultRounds);

  /// Control through the cloud, on behalf of the home.
  nlohmann::json control(const std::string& device_id, const nlohmann::json& set);
  /// Control straight over the device channel, cloud or no cloud. Throws
  /// PolicyDenied when disabled, DeviceOffline when the device is not
  /// connected here.
  nlohmann::json local_control(const std::string& device_id, const nlohmann::json& set);

  /// Bind verdicts seen passing through, by token.
  const std::map<std::string, nlohmann::json>& bind_verdicts() const { return bind_verdicts_; }

  bool poll() override;

 private:
  struct Bridge {
    std::string device_id;
    protocol::FrameReader from_device;
    protocol::FrameReader from_cloud;
    std::optional<netsim::StreamId> upstream;
    std::optional<std::string> token;
  };

  void on_device_frame(netsim::StreamId down, Bridge& b, const protocol::DeviceFrame& f);
  void on_cloud_frame(netsim::StreamId down, Bridge& b, const protocol::DeviceFrame& f);
  void write(netsim::StreamId s, const protocol::DeviceFrame& f);

  Simulation& sim_;
  netsim::EndpointId self_;
  netsim::VirtualNetwork home_;
  netsim::EndpointId cloud_;
  app::ApiClient uplink_;
  Policy policy_;
  Rng rng_;
  IsolationPlan plan_;

  std::map<netsim::StreamId, Bridge> bridges_;  // keyed by the device-side stream
  std::map<netsim::StreamId, netsim::StreamId> upstream_to_down_;
  std::map<std::string, nlohmann::json> bind_verdicts_;
  std::map<std::string, nlohmann::json> local_replies_;  // requestId -> ack payload
};

}  // namespace provlab::proxy
