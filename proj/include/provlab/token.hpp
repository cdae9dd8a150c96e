#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "provlab/random.hpp"

namespace provlab::protocol {

inline constexpr std::int64_t kTokenTtlSeconds = 7200;
inline constexpr std::size_t kTokenLength = 32;

struct ProvisionToken {
  std::string value;
  std::int64_t issued_at = 0;
  std::string region;
  std::string bundle_id;
  std::string user_id;
  bool bound = false;
  std::string device_id;  // set once bound

  bool fresh_at(std::int64_t now) const { return now - issued_at < kTokenTtlSeconds; }
  bool operator==(const ProvisionToken&) const = default;
};

void to_json(nlohmann::json& j, const ProvisionToken& t);
void from_json(const nlohmann::json& j, ProvisionToken& t);

/// 32 characters from [a-z0-9]; `issued_at` is taken from the caller's clock.
ProvisionToken make_token(Rng& rng, std::string region, std::string bundle_id, std::string user_id,
                          std::int64_t now);

/// What the device firmware checks: the length, and nothing else.
bool device_token_check(std::string_view token);

enum class RejectReason { Unknown, Expired, VendorMismatch, UserMismatch, AlreadyBound };

std::string_view to_string(RejectReason r);
std::optional<RejectReason> reject_reason_from_string(std::string_view s);

struct TokenVerdict {
  std::optional<RejectReason> reject;

  bool accepted() const { return !reject; }
};

class Registry;

/// Cloud-side check. `user_id` is optional because a device presenting the
/// token cannot know which account requested it; the app-side queries pass it.
TokenVerdict cloud_token_check(const Registry& registry, std::string_view token, std::int64_t now,
                               std::string_view bundle_id, std::optional<std::string_view> user_id);

}  // namespace provlab::protocol
