#include "provlab/provisioner.hpp"

#include "provlab/envelope.hpp"
#include "provlab/error.hpp"

namespace provlab::app {

using nlohmann::json;

std::vector<std::string> hardcoded_endpoints(std::string_view region) {
  // Octets such as "09" and "05" are kept exactly as shipped in the app.
  if (region == "IN") return {"13.234.164.70", "13.234.09.49"};
  if (region == "AZ") return {"35.167.213.203", "52.27.05.79"};
  if (region == "EU") return {"52.29.0.171", "35.156.160.91"};
  if (region == "AY") return {"162.14.14.134"};
  return {};
}

void Resolver::set_dns(const std::string& region, std::vector<std::string> addresses) {
  dns_[region] = std::move(addresses);
}

std::vector<std::string> Resolver::resolve(const std::string& region, bool dns_available) const {
  if (dns_available) {
    auto it = dns_.find(region);
    if (it != dns_.end() && !it->second.empty()) return it->second;
  }
  return hardcoded_endpoints(region);
}

netsim::EndpointId resolve_cloud_endpoint(const netsim::Broker& broker, const Resolver& resolver,
                                          const std::string& region, bool dns_available) {
  const auto addresses = resolver.resolve(region, dns_available);
  if (addresses.empty()) throw Error(Errc::UnknownRegion, region);
  for (const auto& addr : addresses) {
    auto ep = broker.lookup_address(addr);
    if (ep && broker.online(*ep)) return *ep;
  }
  throw Error(Errc::Unreachable, "no reachable endpoint for region " + region);
}

Provisioner::Provisioner(Simulation& sim, netsim::EndpointId self, AppConfig config, std::uint64_t seed)
    : sim_(sim), self_(self), api_(sim, self, std::move(config), seed) {}

protocol::ProvisionToken Provisioner::acquire_token(const netsim::EndpointId& cloud) {
  const auto result = api_.call(cloud, protocol::kActionTokenGet, json::object());
  protocol::ProvisionToken t;
  t.value = result.at("token").get<std::string>();
  t.region = result.value("region", api_.config().region);
  t.bundle_id = api_.config().bundle_id;
  t.user_id = api_.config().user_id;
  t.issued_at = sim_.clock().now();
  return t;
}

void Provisioner::broadcast(std::span<const std::uint8_t> payload, int rounds, const std::string& ssid) {
  auto& broker = sim_.broker();
  const auto seq = dpl::encode_payload(payload, rounds);
  for (int len : seq.flatten()) {
    const std::vector<std::uint8_t> filler(static_cast<std::size_t>(len), netsim::kFillerByte);
    if (ssid.empty())
      broker.broadcast(self_, dpl::kPort, filler);
    else
      broker.broadcast(self_, ssid, dpl::kPort, filler);
  }
}

ProvisionOutcome Provisioner::provision(const netsim::EndpointId& cloud, const dpl::Credentials& creds, int rounds,
                                        const std::string& ssid) {
  broadcast(dpl::build_payload(creds), rounds, ssid);
  const auto start = sim_.clock().now();
  while (true) {
    sim_.run_until_idle();
    try {
      const auto r = api_.call(cloud, protocol::kActionStatus, {{"token", creds.token}});
      if (r.value("bound", false) && r.value("online", false))
        return {r.at("devId").get<std::string>(), sim_.clock().now() - start};
    } catch (const Error& e) {
      if (e.code() != Errc::Unreachable && e.code() != Errc::CloudRejected) throw;
    }
    if (sim_.clock().now() - start >= kProvisionTimeout)
      throw Error(Errc::Timeout, "no device came online within " + std::to_string(kProvisionTimeout) + " s");
    sim_.clock().advance(kStatusPollInterval);
  }
}

json Provisioner::control_device(const netsim::EndpointId& cloud, const std::string& device_id, const json& set) {
  try {
    const auto r = api_.call(cloud, protocol::kActionControl, {{"devId", device_id}, {"set", set}});
    return r.at("status");
  } catch (const Error& e) {
    if (e.code() == Errc::Unreachable) throw Error(Errc::CloudUnreachable, e.detail());
    if (e.code() == Errc::CloudRejected && (e.detail() == "UnknownDevice" || e.detail() == "DeviceOffline"))
      throw Error(Errc::DeviceOffline, device_id);
    throw;
  }
}

}  // namespace provlab::app
