#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Data-in-packet-length credential channel: the payload is carried purely by
// the lengths of broadcast datagrams.
namespace provlab::dpl {

// Wire constants. See docs/wire-format.md.
inline constexpr std::array<int, 4> kGuide{1, 3, 6, 10};
inline constexpr std::array<int, 4> kSom{18, 35, 60, 65};
inline constexpr int kIdxBase = 100;
inline constexpr int kValBase = 400;
inline constexpr int kLenBase = 700;
inline constexpr int kCrcBase = 1000;
inline constexpr int kGuideReps = 8;
inline constexpr int kDefaultRounds = 5;
inline constexpr int kMaxRounds = 16;
inline constexpr int kPort = 30011;
inline constexpr std::size_t kMaxPayload = 255;
inline constexpr std::size_t kTokenLength = 32;
inline constexpr std::size_t kMaxSsid = 32;
inline constexpr std::size_t kMaxPassphrase = 64;
inline constexpr std::uint8_t kPayloadVersion = 0x01;

enum class Band { none, guide, som, idx, val, len, crc };

/// Band membership by closed ranges: guide 1-10, SOM 18-65, IDX 100-355,
/// VAL 400-655, LEN 700-955, CRC 1000-1255. Anything else is `none`.
Band classify(int length);

/// CRC-8, polynomial 0x07, init 0x00, no reflection, no final xor.
std::uint8_t crc8(std::span<const std::uint8_t> data);

struct Credentials {
  std::string ssid;
  std::string passphrase;
  std::string token;

  bool operator==(const Credentials&) const = default;
};

/// [0x01][len_ssid][ssid][len_psk][psk][token:32]
std::vector<std::uint8_t> build_payload(const Credentials& creds);
/// Same layout, but the token may be any length. Used to reproduce the
/// malformed-token experiments; never produced by a well-behaved app.
std::vector<std::uint8_t> build_raw_payload(const Credentials& creds);

Credentials parse_payload(std::span<const std::uint8_t> payload);
/// Accepts any non-empty token (whatever follows the passphrase).
Credentials parse_payload_fields(std::span<const std::uint8_t> payload);

struct DplSequence {
  std::vector<std::vector<int>> rounds;

  std::vector<int> flatten() const;
  std::size_t size() const;
};

/// Datagrams per round for an n-byte payload.
constexpr std::size_t round_length(std::size_t n) { return 4 * kGuideReps + 4 + 1 + 2 * n + 1; }

DplSequence encode(const Credentials& creds, int rounds = kDefaultRounds);
DplSequence encode_payload(std::span<const std::uint8_t> payload, int rounds = kDefaultRounds);

/// Streaming receiver. Feed it every observed datagram length; it tolerates
/// drops, adjacent duplicates and unrelated traffic.
///
/// Payload bytes are inferred from (IDX, VAL) evidence gathered over all
/// rounds. A VAL is attributed to an index with certainty when the IDX
/// anchors around it leave exactly one slot per received VAL; otherwise the
/// evidence is only a weak vote. Short runs are then placed against slots
/// already known. A single open slot is fixed by the CRC. With more open
/// slots, values seen in runs are matched to the slots their runs allow and
/// every layout is checked; the result is taken only if exactly one payload
/// survives the crc8, the runs and the framing.
class DecoderState {
 public:
  enum class Phase { Hunting, Synced, Collecting, Complete, Failed };

  void feed(int length);
  void reset() { *this = DecoderState{}; }

  Phase phase() const { return phase_; }
  std::optional<int> expected_len() const;
  std::optional<std::uint8_t> crc_seen() const;
  /// Best current estimate for every index that has evidence.
  std::map<int, std::uint8_t> slots() const;

  /// Valid once Complete.
  const std::vector<std::uint8_t>& payload() const { return payload_; }
  /// Strict credentials, or nullopt if not Complete or the token is not 32 chars.
  std::optional<Credentials> credentials() const;
  /// Lenient fields (token of any length), or nullopt if not Complete.
  std::optional<Credentials> fields() const;

  bool operator==(const DecoderState&) const = default;

  struct Segment {
    std::vector<int> lengths;  // IDX/VAL band lengths in arrival order
    bool start_known = false;  // began right after a guide/SOM/LEN packet
    bool end_known = false;    // closed by a CRC/guide/SOM/LEN packet

    bool operator==(const Segment&) const = default;
  };

 private:
  using Votes = std::vector<std::map<std::uint8_t, int>>;

  void on_boundary(Band band);
  void on_data(int length);
  void close_segment(bool end_known);
  void rebuild_closed_votes();
  void add_segment_votes(const Segment& seg, int n, Votes& votes) const;
  void try_complete();
  bool search(const std::vector<std::optional<std::uint8_t>>& known, std::uint8_t crc);
  void enter_collecting();

  Phase phase_ = Phase::Hunting;
  int last_length_ = 0;
  int guide_pos_ = 0;   // bitmask of guide values seen in the current run
  int guide_runs_ = 0;  // consecutive guide packets
  int som_pos_ = 0;
  bool after_preamble_ = false;  // last boundary was guide/SOM/LEN

  std::map<int, int> len_votes_;
  std::map<int, int> crc_votes_;
  std::vector<Segment> segments_;
  std::optional<Segment> open_;
  Votes closed_votes_;
  int closed_votes_n_ = -1;
  std::size_t searched_segments_ = 0;  // segment count at the last joint search

  std::vector<std::uint8_t> payload_;
};

std::string_view to_string(DecoderState::Phase phase);

/// Functional form of DecoderState::feed.
DecoderState decoder_feed(DecoderState state, int length);

}  // namespace provlab::dpl
