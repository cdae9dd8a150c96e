#pragma once

#include <array>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace provlab::protocol {

/// Request fields in the order the vendor app emits them.
inline constexpr std::array<std::string_view, 22> kEnvelopeFields{
    "time",     "lang",      "deviceId",  "et",         "osSystem", "bundleId", "lon",      "channel",
    "appVersion", "ttid",    "v",         "sid",        "sign",     "platform", "postData", "requestId",
    "sdVersion", "timeZoneId", "lat",     "clientId",   "a",        "appRnVersion"};

inline constexpr std::string_view kActionTokenGet = "tuya.m.token.get";
inline constexpr std::string_view kActionBind = "m.device.bind";
inline constexpr std::string_view kActionControl = "m.device.control";
inline constexpr std::string_view kActionStatus = "m.device.status";

bool is_registered_action(std::string_view action);

/// Signing input: top-level members except `sign`, sorted bytewise by name,
/// rendered `name=value` and joined with `||`. Strings are written raw,
/// integers in decimal, booleans as true/false, null as null, and anything
/// else as compact JSON.
std::string canonicalize(const nlohmann::json& envelope);

}  // namespace provlab::protocol
