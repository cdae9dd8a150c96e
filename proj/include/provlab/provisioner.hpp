#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provlab/api_client.hpp"
#include "provlab/dpl.hpp"
#include "provlab/token.hpp"

namespace provlab::app {

inline constexpr std::int64_t kProvisionTimeout = 30;
inline constexpr std::int64_t kStatusPollInterval = 2;

/// Cloud addresses compiled into the app, used when DNS is unavailable.
/// Unknown regions give an empty list.
std::vector<std::string> hardcoded_endpoints(std::string_view region);

class Resolver {
 public:
  void set_dns(const std::string& region, std::vector<std::string> addresses);

  /// DNS answer when available, otherwise the compiled-in table.
  std::vector<std::string> resolve(const std::string& region, bool dns_available) const;

 private:
  std::map<std::string, std::vector<std::string>> dns_;
};

/// First address for `region` that is bound to an online endpoint. Throws
/// UnknownRegion when the lookup yields nothing, Unreachable when nothing
/// answering is bound.
netsim::EndpointId resolve_cloud_endpoint(const netsim::Broker& broker, const Resolver& resolver,
                                          const std::string& region, bool dns_available);

struct ProvisionOutcome {
  std::string device_id;
  std::int64_t elapsed = 0;
};

/// The vendor app: gets a token, broadcasts credentials and drives devices
/// through the cloud.
class Provisioner {
 public:
  Provisioner(Simulation& sim, netsim::EndpointId self, AppConfig config, std::uint64_t seed);

  ApiClient& api() { return api_; }
  const netsim::EndpointId& endpoint() const { return self_; }

  /// Throws CloudRejected or Unreachable.
  protocol::ProvisionToken acquire_token(const netsim::EndpointId& cloud);

  /// Broadcasts `creds` on port 30011 over `ssid` (the app's only network if
  /// empty), then polls the cloud every 2 s until the device bound with the
  /// token is online. Throws Timeout after 30 simulated seconds.
  ProvisionOutcome provision(const netsim::EndpointId& cloud, const dpl::Credentials& creds,
                             int rounds = dpl::kDefaultRounds, const std::string& ssid = {});
  /// Broadcast only, for payloads that bypass the strict token shape.
  void broadcast(std::span<const std::uint8_t> payload, int rounds, const std::string& ssid = {});

  /// Command through the cloud. Returns the device status. Throws
  /// CloudUnreachable or DeviceOffline.
  nlohmann::json control_device(const netsim::EndpointId& cloud, const std::string& device_id,
                                const nlohmann::json& set);

 private:
  Simulation& sim_;
  netsim::EndpointId self_;
  ApiClient api_;
};

}  // namespace provlab::app
