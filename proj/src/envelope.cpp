#include "provlab/envelope.hpp"

#include <algorithm>
#include <vector>

namespace provlab::protocol {

using nlohmann::json;

bool is_registered_action(std::string_view action) {
  return action == kActionTokenGet || action == kActionBind || action == kActionControl ||
         action == kActionStatus;
}

namespace {

std::string render(const json& v) {
  switch (v.type()) {
    case json::value_t::string: return v.get<std::string>();
    case json::value_t::boolean: return v.get<bool>() ? "true" : "false";
    case json::value_t::number_integer: return std::to_string(v.get<std::int64_t>());
    case json::value_t::number_unsigned: return std::to_string(v.get<std::uint64_t>());
    case json::value_t::null: return "null";
    default: return v.dump();
  }
}

}  // namespace

std::string canonicalize(const json& envelope) {
  // bytewise order by name; `sign` never takes part
  std::vector<std::pair<std::string, const json*>> fields;
  for (auto it = envelope.begin(); it != envelope.end(); ++it) {
    if (it.key() == "sign") continue;
    fields.emplace_back(it.key(), &it.value());
  }
  std::sort(fields.begin(), fields.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::string out;
  for (const auto& [name, value] : fields) {
    if (!out.empty()) out += "||";
    out += name;
    out += '=';
    out += render(*value);
  }
  return out;
}

}  // namespace provlab::protocol
