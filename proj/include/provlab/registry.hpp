#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "provlab/secrets.hpp"
#include "provlab/token.hpp"

namespace provlab::protocol {

struct DeviceRecord {
  std::string device_id;
  std::string user_id;
  std::string bundle_id;
  std::string token;
  std::string ssid;        // as reported by the device at bind time
  std::string passphrase;  // likewise
  nlohmann::json status = nlohmann::json::object();

  bool operator==(const DeviceRecord&) const = default;
};

void to_json(nlohmann::json& j, const DeviceRecord& d);
void from_json(const nlohmann::json& j, DeviceRecord& d);

/// Everything the vendor cloud stores. Not synchronized; the cloud
/// serializes access.
class Registry {
 public:
  std::map<std::string, ProvisionToken> tokens;
  std::map<std::string, DeviceRecord> devices;
  std::map<std::string, secrets::SigningKeySet> vendors;

  const ProvisionToken* find_token(std::string_view value) const;

  nlohmann::json to_json() const;
  static Registry from_json(const nlohmann::json& j);

  /// Writes a JSON snapshot. restore(persist(r)) == r.
  void persist(const std::filesystem::path& path) const;
  /// Throws CorruptSnapshot on unreadable or malformed files.
  static Registry restore(const std::filesystem::path& path);

  /// Stable digest of the full state, used to prove nothing changed.
  std::string digest() const;

  bool operator==(const Registry&) const = default;
};

/// What the cloud knows about the network a device lives on.
struct Footprint {
  std::string device_id;
  std::string ssid;
  std::string passphrase;
};

/// Throws UnknownDevice.
Footprint stored_footprint(const Registry& registry, const std::string& device_id);

}  // namespace provlab::protocol
