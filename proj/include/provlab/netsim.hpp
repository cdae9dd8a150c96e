#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "provlab/random.hpp"

namespace provlab::netsim {

enum class Role { device, app, cloud, proxy };

std::string_view to_string(Role role);

struct EndpointId {
  std::string id;
  Role role = Role::device;

  bool operator==(const EndpointId&) const = default;
};

struct VirtualNetwork {
  std::string ssid;
  std::string passphrase;
  std::set<std::string> members;
};

/// Datagram drop/duplication model for broadcast traffic. Streams are never
/// subject to loss.
///
/// Draw order is fixed so the sequence can be replayed outside the broker:
/// for every broadcast, receivers are visited in ascending id order and two
/// values u_drop, u_dup are taken from mt19937_64(seed) via Rng::unit(). The
/// copy is dropped when u_drop < drop_prob; a surviving copy is delivered
/// twice when u_dup < dup_prob.
struct LossModel {
  double drop_prob = 0.0;
  double dup_prob = 0.0;
  std::uint64_t seed = 0;
};

enum class ChannelKind { broadcast, deliver, stream };

std::string_view to_string(ChannelKind kind);

struct CaptureEntry {
  std::int64_t t = 0;
  std::string ssid;
  std::string src;
  std::string dst;  // empty for the sent side of a broadcast
  int port = 0;
  std::size_t len = 0;
  ChannelKind kind = ChannelKind::broadcast;
  std::vector<std::uint8_t> data;  // stream frames only

  bool operator==(const CaptureEntry&) const = default;
};

/// Append-only record of everything the broker carried. Broadcasts appear
/// once as `broadcast` (sent) plus one `deliver` per copy received; a drop
/// is a broadcast with no matching deliver for that receiver.
class CaptureLog {
 public:
  CaptureLog() = default;
  CaptureLog(const CaptureLog& other);
  CaptureLog& operator=(const CaptureLog& other);

  void append(CaptureEntry entry);
  std::vector<CaptureEntry> snapshot() const;
  std::size_t size() const;

  /// Newline-delimited JSON: {t, ssid, src, dst?, port, len, kind, data?}.
  void write_jsonl(std::ostream& out) const;
  std::string to_jsonl() const;
  static CaptureLog read_jsonl(std::istream& in);

 private:
  mutable std::mutex mu_;
  std::vector<CaptureEntry> entries_;
};

using StreamId = std::uint64_t;

struct Datagram {
  EndpointId src;
  std::string ssid;
  int dst_port = 0;
  std::vector<std::uint8_t> payload;
};

struct StreamEvent {
  enum class Kind { opened, data, closed };
  Kind kind = Kind::data;
  StreamId stream = 0;
  EndpointId peer;
  int port = 0;
  std::vector<std::uint8_t> bytes;
};

using Event = std::variant<Datagram, StreamEvent>;

struct Membership {
  EndpointId endpoint;
  std::string ssid;
};

inline constexpr std::size_t kMaxDatagram = 2048;
inline constexpr std::uint8_t kFillerByte = 0x55;

/// In-process network broker. All methods are safe to call from multiple
/// threads; sends from one thread are delivered in the order they were made.
class Broker {
 public:
  Broker(const SimClock& clock, LossModel loss);

  EndpointId register_endpoint(const std::string& id, Role role);
  bool has_endpoint(const std::string& id) const;

  VirtualNetwork create_network(const std::string& ssid, const std::string& passphrase);
  VirtualNetwork network(const std::string& ssid) const;
  std::vector<std::string> network_ssids() const;

  Membership join(const EndpointId& ep, const std::string& ssid, const std::string& passphrase);
  void leave(const EndpointId& ep, const std::string& ssid);

  /// Receive-only attachment used by unprovisioned devices listening for
  /// provisioning broadcasts. Monitors cannot send and are not members.
  void monitor(const EndpointId& ep, const std::string& ssid);
  void stop_monitor(const EndpointId& ep, const std::string& ssid);

  bool is_member(const EndpointId& ep, const std::string& ssid) const;
  std::vector<std::string> memberships(const EndpointId& ep) const;

  void broadcast(const EndpointId& ep, const std::string& ssid, int dst_port,
                 std::span<const std::uint8_t> payload);
  /// Broadcast on the single network `ep` belongs to.
  void broadcast(const EndpointId& ep, int dst_port, std::span<const std::uint8_t> payload);

  void listen(const EndpointId& ep, int port);

  /// Reliable, ordered, bidirectional stream. The peer must be online and
  /// listening on `port`; local peers are reachable only through a shared
  /// network, cloud endpoints from anywhere.
  StreamId open_stream(const EndpointId& ep, const EndpointId& peer, int port);
  void write(StreamId stream, const EndpointId& from, std::span<const std::uint8_t> bytes);
  void close(StreamId stream, const EndpointId& from);
  bool stream_open(StreamId stream) const;
  bool reachable(const EndpointId& from, const EndpointId& to) const;

  /// Taking an endpoint offline closes its streams and refuses new ones.
  void set_online(const EndpointId& ep, bool online);
  bool online(const EndpointId& ep) const;

  std::vector<Event> drain(const EndpointId& ep);
  bool has_pending(const EndpointId& ep) const;

  /// Address labels (e.g. hard-coded cloud IPs) mapped to endpoints.
  void bind_address(const std::string& address, const EndpointId& ep);
  std::optional<EndpointId> lookup_address(const std::string& address) const;

  const CaptureLog& capture() const { return capture_; }

 private:
  struct EndpointState {
    EndpointId id;
    bool online = true;
    std::set<int> listening;
    std::set<std::string> joined;
    std::set<std::string> monitored;
    std::deque<Event> inbox;
  };
  struct NetworkState {
    std::string passphrase;
    std::set<std::string> members;
    std::set<std::string> monitors;
  };
  struct StreamState {
    EndpointId a;
    EndpointId b;
    int port = 0;
    std::string ssid;
    bool open = true;
  };

  EndpointState& endpoint_locked(const std::string& id);
  const EndpointState& endpoint_locked(const std::string& id) const;
  NetworkState& network_locked(const std::string& ssid);
  std::optional<std::string> shared_network_locked(const std::string& a, const std::string& b) const;
  bool reachable_locked(const EndpointState& from, const EndpointState& to) const;
  void close_locked(StreamId stream, const std::string& closer);

  const SimClock& clock_;
  LossModel loss_;
  Rng loss_rng_;
  mutable std::mutex mu_;
  std::map<std::string, EndpointState> endpoints_;
  std::map<std::string, NetworkState> networks_;
  std::map<StreamId, StreamState> streams_;
  std::map<std::string, EndpointId> addresses_;
  StreamId next_stream_ = 1;
  CaptureLog capture_;
};

}  // namespace provlab::netsim
