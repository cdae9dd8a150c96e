#include "provlab/registry.hpp"

#include <fstream>
#include <iterator>

#include "provlab/crypto.hpp"
#include "provlab/error.hpp"

namespace provlab::protocol {

using nlohmann::json;

void to_json(json& j, const DeviceRecord& d) {
  j = json{{"device_id", d.device_id}, {"user_id", d.user_id}, {"bundle_id", d.bundle_id},
           {"token", d.token},         {"ssid", d.ssid},       {"passphrase", d.passphrase},
           {"status", d.status}};
}

void from_json(const json& j, DeviceRecord& d) {
  j.at("device_id").get_to(d.device_id);
  j.at("user_id").get_to(d.user_id);
  j.at("bundle_id").get_to(d.bundle_id);
  j.at("token").get_to(d.token);
  j.at("ssid").get_to(d.ssid);
  j.at("passphrase").get_to(d.passphrase);
  d.status = j.at("status");
}

const ProvisionToken* Registry::find_token(std::string_view value) const {
  auto it = tokens.find(std::string(value));
  return it == tokens.end() ? nullptr : &it->second;
}

json Registry::to_json() const {
  return json{{"tokens", tokens}, {"devices", devices}, {"vendors", vendors}};
}

Registry Registry::from_json(const json& j) {
  Registry r;
  j.at("tokens").get_to(r.tokens);
  j.at("devices").get_to(r.devices);
  j.at("vendors").get_to(r.vendors);
  for (const auto& [key, t] : r.tokens)
    if (key != t.value) throw Error(Errc::CorruptSnapshot, "token key mismatch");
  for (const auto& [key, d] : r.devices)
    if (key != d.device_id) throw Error(Errc::CorruptSnapshot, "device key mismatch");
  return r;
}

void Registry::persist(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
  if (!out) throw Error(Errc::Io, "short write to " + path.string());
}

Registry Registry::restore(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::CorruptSnapshot, "cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptSnapshot, e.what());
  }
}

std::string Registry::digest() const {
  return crypto::hex_encode(crypto::sha256(crypto::as_bytes(to_json().dump())));
}

Footprint stored_footprint(const Registry& registry, const std::string& device_id) {
  auto it = registry.devices.find(device_id);
  if (it == registry.devices.end()) throw Error(Errc::UnknownDevice, device_id);
  return {device_id, it->second.ssid, it->second.passphrase};
}

}  // namespace provlab::protocol
