#include "provlab/frame.hpp"

#include "provlab/error.hpp"

namespace provlab::protocol {

using nlohmann::json;

std::string_view to_string(FrameKind k) {
  switch (k) {
    case FrameKind::bind: return "bind";
    case FrameKind::command: return "command";
    case FrameKind::status: return "status";
    case FrameKind::ack: return "ack";
  }
  return "status";
}

namespace {

FrameKind kind_from_string(const std::string& s) {
  for (auto k : {FrameKind::bind, FrameKind::command, FrameKind::status, FrameKind::ack})
    if (to_string(k) == s) return k;
  throw Error(Errc::MalformedFrame, "unknown kind '" + s + "'");
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const DeviceFrame& frame) {
  json body = {{"kind", to_string(frame.kind)}, {"device_id", frame.device_id}, {"payload", frame.payload}};
  if (frame.token) body["token"] = *frame.token;
  const auto text = body.dump();
  if (text.size() > kMaxFrameBody) throw Error(Errc::MalformedFrame, "frame too large");
  const auto n = static_cast<std::uint32_t>(text.size());
  std::vector<std::uint8_t> out{static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
                                static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

DeviceFrame decode_frame_body(std::span<const std::uint8_t> body) {
  json j;
  try {
    j = json::parse(body.begin(), body.end());
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedFrame, e.what());
  }
  if (!j.is_object()) throw Error(Errc::MalformedFrame, "body is not an object");
  try {
    DeviceFrame f;
    f.kind = kind_from_string(j.at("kind").get<std::string>());
    f.device_id = j.at("device_id").get<std::string>();
    if (j.contains("token")) f.token = j["token"].get<std::string>();
    if (j.contains("payload")) f.payload = j["payload"];
    if (!f.payload.is_object()) throw Error(Errc::MalformedFrame, "payload is not an object");
    return f;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedFrame, e.what());
  }
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) { buffer_.insert(buffer_.end(), bytes.begin(), bytes.end()); }

std::optional<DeviceFrame> FrameReader::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const std::size_t n = static_cast<std::size_t>(buffer_[0]) << 24 | static_cast<std::size_t>(buffer_[1]) << 16 |
                        static_cast<std::size_t>(buffer_[2]) << 8 | buffer_[3];
  if (n > kMaxFrameBody) {
    buffer_.clear();
    throw Error(Errc::MalformedFrame, "declared length too large");
  }
  if (buffer_.size() < 4 + n) return std::nullopt;
  std::vector<std::uint8_t> body(buffer_.begin() + 4, buffer_.begin() + 4 + static_cast<std::ptrdiff_t>(n));
  buffer_.erase(buffer_.begin(), buffer_.begin() + 4 + static_cast<std::ptrdiff_t>(n));
  return decode_frame_body(body);
}

}  // namespace provlab::protocol
