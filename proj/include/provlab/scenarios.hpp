#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provlab/api_client.hpp"
#include "provlab/bmp.hpp"
#include "provlab/cloud.hpp"
#include "provlab/device.hpp"
#include "provlab/dpl.hpp"
#include "provlab/provisioner.hpp"
#include "provlab/proxy.hpp"
#include "provlab/simulation.hpp"

namespace provlab::scenario {

/// A vendor as the cloud and its app see it. secret2 lives only inside the
/// BMP; the app config carries the copy recovered from it.
struct Vendor {
  secrets::SigningKeySet keys;
  std::string stego_seed;
  bmp::Image image;
  app::AppConfig app;
};

/// Generates keys, hides secret2 in a fresh BMP and recovers it again for
/// the app config.
Vendor make_vendor(Rng& rng, const std::string& bundle_id, const std::string& user_id = "user-1");

/// One home: a router network, a cloud with one vendor and a phone running
/// the vendor app. Devices and proxies are added on demand.
class Testbed {
 public:
  explicit Testbed(std::uint64_t seed, netsim::LossModel loss = {});

  Simulation sim;
  Rng rng;
  netsim::VirtualNetwork home;
  Vendor vendor;
  cloud::Cloud cloud;
  app::Provisioner phone;

  device::Device& add_device(const std::string& id, std::optional<netsim::EndpointId> bind_to = std::nullopt,
                             std::optional<std::string> bundle_id = std::nullopt);
  proxy::Gateway& add_proxy(proxy::Policy policy = {});
  /// An endpoint on the home network that does not follow any protocol.
  netsim::EndpointId add_intruder(const std::string& id);

 private:
  std::vector<std::unique_ptr<device::Device>> devices_;
  std::unique_ptr<proxy::Gateway> proxy_;
};

struct Step {
  std::string expect;
  std::string observe;
  bool pass = false;
};

struct Report {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<Step> steps;
  /// Everything the broker carried, as JSONL.
  std::string capture;

  bool pass() const;
  /// {scenario, seed, steps: [{expect, observe, pass}], pass}
  nlohmann::json to_json() const;
};

const std::vector<std::string>& names();

/// Runs `name` in a fresh simulation. Throws UnknownScenario.
Report run(const std::string& name, std::uint64_t seed, netsim::LossModel loss = {});

/// One provisioning attempt recovered from captured port-30011 lengths.
struct DecodedAttempt {
  std::string ssid;      // network it was heard on
  std::string sender;
  std::string listener;  // empty for the sender-side view
  dpl::Credentials fields;
};

/// Replays every listener's view of port-30011 traffic (or the sender view
/// when nobody received anything) through the decoder. Throws
/// NoProvisioningTraffic when the capture holds none.
std::vector<DecodedAttempt> decode_capture(const std::vector<netsim::CaptureEntry>& entries);

}  // namespace provlab::scenario
