#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace provlab::protocol {

inline constexpr int kDevicePort = 6668;
inline constexpr int kDevicePortAlt = 1883;
inline constexpr int kAppPort = 443;
inline constexpr std::size_t kMaxFrameBody = 1 << 20;

enum class FrameKind { bind, command, status, ack };

std::string_view to_string(FrameKind k);

/// Device channel record: 4-byte big-endian body length, then a JSON body
/// {kind, token?, device_id, payload}.
struct DeviceFrame {
  FrameKind kind = FrameKind::status;
  std::optional<std::string> token;
  std::string device_id;
  nlohmann::json payload = nlohmann::json::object();

  bool operator==(const DeviceFrame&) const = default;
};

std::vector<std::uint8_t> encode_frame(const DeviceFrame& frame);
/// Decodes exactly one body (without the length prefix). Throws MalformedFrame.
DeviceFrame decode_frame_body(std::span<const std::uint8_t> body);

/// Reassembles frames from stream chunks.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete frame, if any. Throws MalformedFrame; the reader then
  /// discards its buffer.
  std::optional<DeviceFrame> next();

 private:
  std::vector<std::uint8_t> buffer_;
};

}  // namespace provlab::protocol
