#include "provlab/netsim.hpp"

#include <nlohmann/json.hpp>

#include <istream>
#include <ostream>
#include <sstream>

#include "provlab/crypto.hpp"
#include "provlab/error.hpp"

namespace provlab::netsim {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::device: return "device";
    case Role::app: return "app";
    case Role::cloud: return "cloud";
    case Role::proxy: return "proxy";
  }
  return "device";
}

std::string_view to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::broadcast: return "broadcast";
    case ChannelKind::deliver: return "deliver";
    case ChannelKind::stream: return "stream";
  }
  return "broadcast";
}

namespace {
ChannelKind kind_from_string(std::string_view s) {
  if (s == "broadcast") return ChannelKind::broadcast;
  if (s == "deliver") return ChannelKind::deliver;
  if (s == "stream") return ChannelKind::stream;
  throw Error(Errc::BadEncoding, "capture kind '" + std::string(s) + "'");
}
}  // namespace

// ---------------------------------------------------------------------------
// CaptureLog

CaptureLog::CaptureLog(const CaptureLog& other) : entries_(other.snapshot()) {}

CaptureLog& CaptureLog::operator=(const CaptureLog& other) {
  if (this != &other) {
    auto copy = other.snapshot();
    std::lock_guard lock(mu_);
    entries_ = std::move(copy);
  }
  return *this;
}

void CaptureLog::append(CaptureEntry entry) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(entry));
}

std::vector<CaptureEntry> CaptureLog::snapshot() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t CaptureLog::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

void CaptureLog::write_jsonl(std::ostream& out) const {
  for (const auto& e : snapshot()) {
    json j = {{"t", e.t},     {"ssid", e.ssid}, {"src", e.src},
              {"port", e.port}, {"len", e.len}, {"kind", to_string(e.kind)}};
    if (!e.dst.empty()) j["dst"] = e.dst;
    if (!e.data.empty()) j["data"] = crypto::base64_encode(e.data);
    out << j.dump() << '\n';
  }
}

std::string CaptureLog::to_jsonl() const {
  std::ostringstream out;
  write_jsonl(out);
  return out.str();
}

CaptureLog CaptureLog::read_jsonl(std::istream& in) {
  CaptureLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      CaptureEntry e;
      e.t = j.at("t").get<std::int64_t>();
      e.ssid = j.at("ssid").get<std::string>();
      e.src = j.at("src").get<std::string>();
      e.port = j.at("port").get<int>();
      e.len = j.at("len").get<std::size_t>();
      e.kind = kind_from_string(j.at("kind").get<std::string>());
      if (j.contains("dst")) e.dst = j["dst"].get<std::string>();
      if (j.contains("data")) e.data = crypto::base64_decode(j["data"].get<std::string>());
      log.entries_.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw Error(Errc::BadEncoding, "capture line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return log;
}

// ---------------------------------------------------------------------------
// Broker

Broker::Broker(const SimClock& clock, LossModel loss)
    : clock_(clock), loss_(loss), loss_rng_(loss.seed) {}

EndpointId Broker::register_endpoint(const std::string& id, Role role) {
  std::lock_guard lock(mu_);
  if (id.empty()) throw Error(Errc::InvalidLength, "endpoint id");
  if (endpoints_.contains(id)) throw Error(Errc::DuplicateEndpoint, id);
  EndpointId ep{id, role};
  endpoints_[id].id = ep;
  return ep;
}

bool Broker::has_endpoint(const std::string& id) const {
  std::lock_guard lock(mu_);
  return endpoints_.contains(id);
}

Broker::EndpointState& Broker::endpoint_locked(const std::string& id) {
  auto it = endpoints_.find(id);
  if (it == endpoints_.end()) throw Error(Errc::UnknownEndpoint, id);
  return it->second;
}

const Broker::EndpointState& Broker::endpoint_locked(const std::string& id) const {
  auto it = endpoints_.find(id);
  if (it == endpoints_.end()) throw Error(Errc::UnknownEndpoint, id);
  return it->second;
}

Broker::NetworkState& Broker::network_locked(const std::string& ssid) {
  auto it = networks_.find(ssid);
  if (it == networks_.end()) throw Error(Errc::UnknownSsid, ssid);
  return it->second;
}

VirtualNetwork Broker::create_network(const std::string& ssid, const std::string& passphrase) {
  if (ssid.empty() || ssid.size() > 32) throw Error(Errc::InvalidLength, "ssid must be 1-32 bytes");
  if (passphrase.size() < 8 || passphrase.size() > 64)
    throw Error(Errc::InvalidLength, "passphrase must be 8-64 bytes");
  std::lock_guard lock(mu_);
  if (networks_.contains(ssid)) throw Error(Errc::DuplicateSsid, ssid);
  networks_[ssid].passphrase = passphrase;
  return VirtualNetwork{ssid, passphrase, {}};
}

VirtualNetwork Broker::network(const std::string& ssid) const {
  std::lock_guard lock(mu_);
  auto it = networks_.find(ssid);
  if (it == networks_.end()) throw Error(Errc::UnknownSsid, ssid);
  return VirtualNetwork{ssid, it->second.passphrase, it->second.members};
}

std::vector<std::string> Broker::network_ssids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [ssid, _] : networks_) out.push_back(ssid);
  return out;
}

Membership Broker::join(const EndpointId& ep, const std::string& ssid, const std::string& passphrase) {
  std::lock_guard lock(mu_);
  auto& state = endpoint_locked(ep.id);
  auto& net = network_locked(ssid);
  if (!crypto::constant_time_equal(net.passphrase, passphrase)) throw Error(Errc::WrongPassphrase, ssid);
  net.members.insert(ep.id);
  state.joined.insert(ssid);
  return Membership{state.id, ssid};
}

void Broker::leave(const EndpointId& ep, const std::string& ssid) {
  std::lock_guard lock(mu_);
  auto& state = endpoint_locked(ep.id);
  network_locked(ssid).members.erase(ep.id);
  state.joined.erase(ssid);
}

void Broker::monitor(const EndpointId& ep, const std::string& ssid) {
  std::lock_guard lock(mu_);
  auto& state = endpoint_locked(ep.id);
  network_locked(ssid).monitors.insert(ep.id);
  state.monitored.insert(ssid);
}

void Broker::stop_monitor(const EndpointId& ep, const std::string& ssid) {
  std::lock_guard lock(mu_);
  auto& state = endpoint_locked(ep.id);
  network_locked(ssid).monitors.erase(ep.id);
  state.monitored.erase(ssid);
}

bool Broker::is_member(const EndpointId& ep, const std::string& ssid) const {
  std::lock_guard lock(mu_);
  return endpoint_locked(ep.id).joined.contains(ssid);
}

std::vector<std::string> Broker::memberships(const EndpointId& ep) const {
  std::lock_guard lock(mu_);
  const auto& joined = endpoint_locked(ep.id).joined;
  return {joined.begin(), joined.end()};
}

void Broker::broadcast(const EndpointId& ep, const std::string& ssid, int dst_port,
                       std::span<const std::uint8_t> payload) {
  if (payload.empty() || payload.size() > kMaxDatagram)
    throw Error(Errc::InvalidLength, "datagram payload must be 1-2048 bytes");
  if (dst_port < 1 || dst_port > 65535) throw Error(Errc::InvalidLength, "port");

  std::lock_guard lock(mu_);
  auto& sender = endpoint_locked(ep.id);
  auto& net = network_locked(ssid);
  if (!sender.joined.contains(ssid)) throw Error(Errc::NotJoined, ep.id + " not in " + ssid);

  const auto t = clock_.now();
  capture_.append({t, ssid, ep.id, {}, dst_port, payload.size(), ChannelKind::broadcast, {}});

  std::set<std::string> receivers = net.members;
  receivers.insert(net.monitors.begin(), net.monitors.end());
  receivers.erase(ep.id);
  for (const auto& rid : receivers) {
    const double u_drop = loss_rng_.unit();
    const double u_dup = loss_rng_.unit();
    if (u_drop < loss_.drop_prob) continue;
    auto& rx = endpoint_locked(rid);
    if (!rx.online) continue;
    const int copies = u_dup < loss_.dup_prob ? 2 : 1;
    for (int c = 0; c < copies; ++c) {
      rx.inbox.emplace_back(Datagram{sender.id, ssid, dst_port, {payload.begin(), payload.end()}});
      capture_.append({t, ssid, ep.id, rid, dst_port, payload.size(), ChannelKind::deliver, {}});
    }
  }
}

void Broker::broadcast(const EndpointId& ep, int dst_port, std::span<const std::uint8_t> payload) {
  std::string ssid;
  {
    std::lock_guard lock(mu_);
    const auto& joined = endpoint_locked(ep.id).joined;
    if (joined.size() != 1) throw Error(Errc::NotJoined, ep.id + " must belong to exactly one network");
    ssid = *joined.begin();
  }
  broadcast(ep, ssid, dst_port, payload);
}

void Broker::listen(const EndpointId& ep, int port) {
  std::lock_guard lock(mu_);
  endpoint_locked(ep.id).listening.insert(port);
}

std::optional<std::string> Broker::shared_network_locked(const std::string& a, const std::string& b) const {
  const auto& ja = endpoint_locked(a).joined;
  const auto& jb = endpoint_locked(b).joined;
  for (const auto& ssid : ja)
    if (jb.contains(ssid)) return ssid;
  return std::nullopt;
}

bool Broker::reachable_locked(const EndpointState& from, const EndpointState& to) const {
  if (!from.online || !to.online) return false;
  if (to.id.role == Role::cloud || from.id.role == Role::cloud) return true;
  return shared_network_locked(from.id.id, to.id.id).has_value();
}

bool Broker::reachable(const EndpointId& from, const EndpointId& to) const {
  std::lock_guard lock(mu_);
  return reachable_locked(endpoint_locked(from.id), endpoint_locked(to.id));
}

StreamId Broker::open_stream(const EndpointId& ep, const EndpointId& peer, int port) {
  std::lock_guard lock(mu_);
  auto& from = endpoint_locked(ep.id);
  auto it = endpoints_.find(peer.id);
  if (it == endpoints_.end()) throw Error(Errc::PeerUnreachable, peer.id + " unknown");
  auto& to = it->second;
  if (!reachable_locked(from, to) || !to.listening.contains(port))
    throw Error(Errc::PeerUnreachable, peer.id + ":" + std::to_string(port));

  const StreamId id = next_stream_++;
  auto ssid = shared_network_locked(ep.id, peer.id).value_or("wan");
  streams_[id] = StreamState{from.id, to.id, port, ssid, true};
  to.inbox.emplace_back(StreamEvent{StreamEvent::Kind::opened, id, from.id, port, {}});
  return id;
}

void Broker::write(StreamId stream, const EndpointId& from, std::span<const std::uint8_t> bytes) {
  std::lock_guard lock(mu_);
  auto it = streams_.find(stream);
  if (it == streams_.end() || !it->second.open) throw Error(Errc::PeerUnreachable, "stream closed");
  auto& s = it->second;
  const bool from_a = s.a.id == from.id;
  if (!from_a && s.b.id != from.id) throw Error(Errc::NotJoined, from.id + " not on stream");
  const auto& peer = from_a ? s.b : s.a;
  auto& rx = endpoint_locked(peer.id);
  if (!rx.online || !endpoint_locked(from.id).online) {
    close_locked(stream, from.id);
    throw Error(Errc::PeerUnreachable, peer.id);
  }
  capture_.append({clock_.now(), s.ssid, from.id, peer.id, s.port, bytes.size(), ChannelKind::stream,
                   {bytes.begin(), bytes.end()}});
  rx.inbox.emplace_back(
      StreamEvent{StreamEvent::Kind::data, stream, endpoint_locked(from.id).id, s.port, {bytes.begin(), bytes.end()}});
}

void Broker::close_locked(StreamId stream, const std::string& closer) {
  auto it = streams_.find(stream);
  if (it == streams_.end() || !it->second.open) return;
  auto& s = it->second;
  s.open = false;
  const auto& other = s.a.id == closer ? s.b : s.a;
  const auto& self = s.a.id == closer ? s.a : s.b;
  auto& rx = endpoint_locked(other.id);
  if (rx.online) rx.inbox.emplace_back(StreamEvent{StreamEvent::Kind::closed, stream, self, s.port, {}});
}

void Broker::close(StreamId stream, const EndpointId& from) {
  std::lock_guard lock(mu_);
  close_locked(stream, from.id);
}

bool Broker::stream_open(StreamId stream) const {
  std::lock_guard lock(mu_);
  auto it = streams_.find(stream);
  return it != streams_.end() && it->second.open;
}

void Broker::set_online(const EndpointId& ep, bool online) {
  std::lock_guard lock(mu_);
  auto& state = endpoint_locked(ep.id);
  state.online = online;
  if (online) return;
  state.inbox.clear();
  for (auto& [id, s] : streams_)
    if (s.open && (s.a.id == ep.id || s.b.id == ep.id)) close_locked(id, ep.id);
}

bool Broker::online(const EndpointId& ep) const {
  std::lock_guard lock(mu_);
  return endpoint_locked(ep.id).online;
}

std::vector<Event> Broker::drain(const EndpointId& ep) {
  std::lock_guard lock(mu_);
  auto& inbox = endpoint_locked(ep.id).inbox;
  std::vector<Event> out(std::make_move_iterator(inbox.begin()), std::make_move_iterator(inbox.end()));
  inbox.clear();
  return out;
}

bool Broker::has_pending(const EndpointId& ep) const {
  std::lock_guard lock(mu_);
  return !endpoint_locked(ep.id).inbox.empty();
}

void Broker::bind_address(const std::string& address, const EndpointId& ep) {
  std::lock_guard lock(mu_);
  endpoint_locked(ep.id);
  addresses_[address] = ep;
}

std::optional<EndpointId> Broker::lookup_address(const std::string& address) const {
  std::lock_guard lock(mu_);
  auto it = addresses_.find(address);
  if (it == addresses_.end()) return std::nullopt;
  return it->second;
}

}  // namespace provlab::netsim
