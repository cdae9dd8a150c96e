#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provlab/netsim.hpp"
#include "provlab/secrets.hpp"
#include "provlab/simulation.hpp"

namespace provlab::app {

/// What a vendor app knows about itself.
struct AppConfig {
  std::string bundle_id = "com.xyz.smart";
  std::string client_id = "tt3advw3as8se94muvt9";
  std::string region = "EU";
  std::string user_id = "user-1";
  std::string app_version = "1.1.2";
  std::string sd_version = "3.20.1";
  std::string os_system = "14.2";
  std::string platform = "iPhone%20%20Max";
  std::string phone_id = "CAAC4B69-A95B-4483-801D-1F87F793505A";
  std::string lat = "90.000000000000";
  std::string lon = "-90.000000000000";
  secrets::SigningKeySet keys;
};

/// Reads {bundleId, clientId, region, userId?, keys: {certHash, secret1,
/// secret2-bmp-path, seed}}. secret2 is recovered from the BMP; a relative
/// path is taken from the config file's directory.
AppConfig load_app_config(const std::filesystem::path& path);

/// Signed-envelope client for the cloud's /api.json endpoint. Each call
/// opens a fresh stream to port 443 and pumps the simulation until the
/// answer arrives.
class ApiClient {
 public:
  ApiClient(Simulation& sim, netsim::EndpointId self, AppConfig config, std::uint64_t seed);

  const AppConfig& config() const { return config_; }
  const netsim::EndpointId& endpoint() const { return self_; }

  /// Request fields with postData sealed, not yet signed.
  nlohmann::json make_fields(std::string_view action, const nlohmann::json& post);
  void sign(nlohmann::json& envelope) const;
  nlohmann::json envelope(std::string_view action, const nlohmann::json& post);

  /// Raw exchange. Throws Unreachable when the cloud cannot be reached or
  /// does not answer.
  nlohmann::json send(const netsim::EndpointId& cloud, const nlohmann::json& envelope);

  /// Signs, sends, checks the response signature and opens `result`.
  /// Throws CloudRejected (detail = the cloud's error code) or Unreachable.
  nlohmann::json call(const netsim::EndpointId& cloud, std::string_view action, const nlohmann::json& post);
  /// Same, for an envelope the caller built and signed.
  nlohmann::json call_envelope(const netsim::EndpointId& cloud, const nlohmann::json& envelope);

  /// Every envelope this client put on the wire.
  const std::vector<nlohmann::json>& sent() const { return sent_; }

 private:
  Simulation& sim_;
  netsim::EndpointId self_;
  AppConfig config_;
  crypto::Bytes key_;
  Rng rng_;
  std::vector<nlohmann::json> sent_;
};

/// Cloud error code carried by a CloudRejected error.
std::string rejection_code(const std::exception& e);

}  // namespace provlab::app
