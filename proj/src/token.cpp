#include "provlab/token.hpp"

#include "provlab/registry.hpp"

namespace provlab::protocol {

using nlohmann::json;

void to_json(json& j, const ProvisionToken& t) {
  j = json{{"value", t.value},         {"issued_at", t.issued_at}, {"region", t.region},
           {"bundle_id", t.bundle_id}, {"user_id", t.user_id},     {"bound", t.bound},
           {"device_id", t.device_id}};
}

void from_json(const json& j, ProvisionToken& t) {
  j.at("value").get_to(t.value);
  j.at("issued_at").get_to(t.issued_at);
  j.at("region").get_to(t.region);
  j.at("bundle_id").get_to(t.bundle_id);
  j.at("user_id").get_to(t.user_id);
  j.at("bound").get_to(t.bound);
  j.at("device_id").get_to(t.device_id);
}

ProvisionToken make_token(Rng& rng, std::string region, std::string bundle_id, std::string user_id,
                          std::int64_t now) {
  ProvisionToken t;
  t.value = rng.alnum(kTokenLength);
  t.issued_at = now;
  t.region = std::move(region);
  t.bundle_id = std::move(bundle_id);
  t.user_id = std::move(user_id);
  return t;
}

bool device_token_check(std::string_view token) { return token.size() == kTokenLength; }

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::Unknown: return "Unknown";
    case RejectReason::Expired: return "Expired";
    case RejectReason::VendorMismatch: return "VendorMismatch";
    case RejectReason::UserMismatch: return "UserMismatch";
    case RejectReason::AlreadyBound: return "AlreadyBound";
  }
  return "Unknown";
}

std::optional<RejectReason> reject_reason_from_string(std::string_view s) {
  for (auto r : {RejectReason::Unknown, RejectReason::Expired, RejectReason::VendorMismatch,
                 RejectReason::UserMismatch, RejectReason::AlreadyBound})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

TokenVerdict cloud_token_check(const Registry& registry, std::string_view token, std::int64_t now,
                               std::string_view bundle_id, std::optional<std::string_view> user_id) {
  const auto* t = registry.find_token(token);
  if (!t) return {RejectReason::Unknown};
  if (!t->fresh_at(now)) return {RejectReason::Expired};
  if (t->bundle_id != bundle_id) return {RejectReason::VendorMismatch};
  if (user_id && t->user_id != *user_id) return {RejectReason::UserMismatch};
  if (t->bound) return {RejectReason::AlreadyBound};
  return {};
}

}  // namespace provlab::protocol
