#include <algorithm>

#include "provlab/dpl.hpp"
#include "provlab/error.hpp"

namespace provlab::dpl {

namespace {

// Certain and weak observations share one counter; certain ones live in the
// high bits so no amount of weak evidence can pass for a certain vote.
constexpr int kCertainWeight = 1 << 16;
constexpr int kWeakWeight = 1;
// Bounds the memory a long stream of unrelated traffic can pin.
constexpr std::size_t kMaxSegments = 64;
constexpr std::size_t kMaxSegmentLength = 2 * kMaxPayload + 16;

template <typename K>
std::optional<K> argmax(const std::map<K, int>& votes) {
  std::optional<K> best;
  int best_weight = 0;
  for (const auto& [key, weight] : votes) {
    if (weight > best_weight) {
      best = key;
      best_weight = weight;
    }
  }
  return best;
}

struct Group {
  bool is_idx = false;
  int value = 0;  // index for IDX, byte for VAL
};

// A run of VALs bracketed by two anchors with fewer VALs than slots.
struct Run {
  int lo = 0;
  int hi = 0;
  std::vector<int> values;
};

// Collapse adjacent repeats: a repeated IDX is always a duplicate, a repeated
// VAL is either a duplicate or two equal bytes whose separating IDX was lost.
// Either way the run counts as one observation.
std::optional<std::vector<Group>> group_segment(const std::vector<int>& lengths, int n) {
  std::vector<Group> groups;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (i > 0 && lengths[i] == lengths[i - 1]) continue;
    const int l = lengths[i];
    if (classify(l) == Band::idx) {
      const int idx = l - kIdxBase;
      if (idx >= n) return std::nullopt;  // belongs to some other payload
      groups.push_back({true, idx});
    } else {
      groups.push_back({false, l - kValBase});
    }
  }
  return groups;
}

// Calls fn(lo, hi, run) for every VAL run; lo/hi are empty when unanchored.
template <typename Fn>
void for_each_run(const DecoderState::Segment& seg, int n, Fn&& fn) {
  const auto groups = group_segment(seg.lengths, n);
  if (!groups) return;
  std::optional<int> lo;
  if (seg.start_known) lo = 0;
  std::vector<int> run;
  auto flush = [&](std::optional<int> hi) {
    if (!run.empty()) fn(lo, hi, run);
    run.clear();
  };
  for (const auto& g : *groups) {
    if (g.is_idx) {
      if (lo && g.value < *lo) {
        // out-of-order anchor: discard what we had and restart from here
        run.clear();
      } else {
        flush(g.value);
      }
      lo = g.value;
    } else {
      run.push_back(g.value);
    }
  }
  // an open-ended segment only trusts its lower anchor
  flush(seg.end_known ? std::optional<int>(n) : std::nullopt);
}

using Known = std::vector<std::optional<std::uint8_t>>;

// ok[j][p]: element j of the run can sit at slot lo + p in some placement of
// the whole run consistent with `known`. VALs of a run are an ordered
// subsequence of [lo, hi).
std::vector<std::vector<char>> feasible(const Run& r, const Known& known) {
  const int m = static_cast<int>(r.values.size());
  const int span = r.hi - r.lo;
  auto fits = [&](int j, int p) {
    const auto& k = known[static_cast<std::size_t>(r.lo + p)];
    return !k || *k == r.values[static_cast<std::size_t>(j)];
  };
  std::vector<std::vector<char>> fwd(m, std::vector<char>(span, 0)), bwd(m, std::vector<char>(span, 0));
  for (int j = 0; j < m; ++j) {
    bool reach = j == 0;
    for (int p = 0; p < span; ++p) {
      fwd[j][p] = reach && fits(j, p);
      if (j > 0 && fwd[j - 1][p]) reach = true;
    }
  }
  for (int j = m - 1; j >= 0; --j) {
    bool reach = j == m - 1;
    for (int p = span - 1; p >= 0; --p) {
      bwd[j][p] = reach && fits(j, p);
      if (j < m - 1 && bwd[j + 1][p]) reach = true;
    }
  }
  for (int j = 0; j < m; ++j)
    for (int p = 0; p < span; ++p) fwd[j][p] = fwd[j][p] && bwd[j][p];
  return fwd;
}

// Fixes the run elements that can only sit in one slot.
bool propagate(const Run& r, Known& known) {
  const auto ok = feasible(r, known);
  bool changed = false;
  for (std::size_t j = 0; j < ok.size(); ++j) {
    int only = -1;
    int count = 0;
    for (int p = 0; p < static_cast<int>(ok[j].size()) && count < 2; ++p)
      if (ok[j][p]) {
        only = p;
        ++count;
      }
    if (count != 1) continue;
    auto& k = known[static_cast<std::size_t>(r.lo + only)];
    if (!k) {
      k = static_cast<std::uint8_t>(r.values[j]);
      changed = true;
    }
  }
  return changed;
}

// Every VAL of the run matches a slot, in order, with all slots filled.
bool consistent(const Run& r, const std::vector<std::uint8_t>& payload) {
  std::size_t j = 0;
  for (int p = r.lo; p < r.hi && j < r.values.size(); ++p)
    if (payload[static_cast<std::size_t>(p)] == r.values[j]) ++j;
  return j == r.values.size();
}

std::vector<Run> collect_runs(const std::vector<DecoderState::Segment>& segments,
                              const std::optional<DecoderState::Segment>& open, int n) {
  std::vector<Run> runs;
  auto collect = [&](const DecoderState::Segment& seg) {
    for_each_run(seg, n, [&](std::optional<int> lo, std::optional<int> hi, const std::vector<int>& run) {
      if (lo && hi && *hi - *lo > static_cast<int>(run.size())) runs.push_back({*lo, *hi, run});
    });
  };
  for (const auto& seg : segments) collect(seg);
  if (open) collect(*open);
  return runs;
}

constexpr std::size_t kMaxSearchUnknowns = 8;
constexpr std::size_t kMaxSearchCandidates = 4096;

}  // namespace

std::string_view to_string(DecoderState::Phase phase) {
  switch (phase) {
    case DecoderState::Phase::Hunting: return "Hunting";
    case DecoderState::Phase::Synced: return "Synced";
    case DecoderState::Phase::Collecting: return "Collecting";
    case DecoderState::Phase::Complete: return "Complete";
    case DecoderState::Phase::Failed: return "Failed";
  }
  return "Hunting";
}

std::optional<int> DecoderState::expected_len() const { return argmax(len_votes_); }

std::optional<std::uint8_t> DecoderState::crc_seen() const {
  auto c = argmax(crc_votes_);
  if (!c) return std::nullopt;
  return static_cast<std::uint8_t>(*c);
}

void DecoderState::feed(int length) {
  if (phase_ == Phase::Complete || phase_ == Phase::Failed) return;

  const Band band = classify(length);
  if (band == Band::none) return;

  // Adjacent repeats of preamble packets are duplicates; the sequence itself
  // never repeats a length back to back.
  const bool repeat = length == last_length_;
  last_length_ = length;

  switch (band) {
    case Band::guide:
      if (phase_ == Phase::Hunting && !repeat) {
        // Sync on two sequences' worth of guide packets in a row that use
        // only guide values and show all four of them. Requiring intact
        // back-to-back sequences would make sync itself fragile under loss.
        const auto it = std::find(kGuide.begin(), kGuide.end(), length);
        if (it == kGuide.end()) {
          guide_pos_ = guide_runs_ = 0;
        } else {
          guide_pos_ |= 1 << (it - kGuide.begin());
          if (++guide_runs_ >= 2 * static_cast<int>(kGuide.size()) && guide_pos_ == 0xF) phase_ = Phase::Synced;
        }
      }
      if (phase_ == Phase::Synced) som_pos_ = 0;
      on_boundary(band);
      break;
    case Band::som:
      if (phase_ == Phase::Hunting) guide_pos_ = guide_runs_ = 0;
      if (phase_ == Phase::Synced && !repeat) {
        for (int j = som_pos_; j < static_cast<int>(kSom.size()); ++j) {
          if (length == kSom[j]) {
            som_pos_ = j + 1;
            break;
          }
        }
        if (som_pos_ == static_cast<int>(kSom.size())) enter_collecting();
      }
      on_boundary(band);
      break;
    case Band::len:
    case Band::crc:
      if (phase_ == Phase::Hunting) guide_pos_ = guide_runs_ = 0;
      if (phase_ == Phase::Synced && som_pos_ > 0) enter_collecting();
      if (band == Band::len)
        ++len_votes_[length - kLenBase];
      else
        ++crc_votes_[length - kCrcBase];
      on_boundary(band);
      break;
    case Band::idx:
    case Band::val:
      if (phase_ == Phase::Hunting) guide_pos_ = guide_runs_ = 0;
      if (phase_ == Phase::Synced && som_pos_ > 0) enter_collecting();
      on_data(length);
      break;
    case Band::none:
      break;
  }

  if (phase_ == Phase::Collecting) try_complete();
}

void DecoderState::enter_collecting() {
  phase_ = Phase::Collecting;
  som_pos_ = 0;
}

void DecoderState::on_boundary(Band band) {
  if (open_) close_segment(true);
  after_preamble_ = band != Band::crc;
}

void DecoderState::on_data(int length) {
  if (!open_) {
    open_ = Segment{{}, after_preamble_, false};
  }
  if (open_->lengths.size() >= kMaxSegmentLength) return;
  open_->lengths.push_back(length);
}

void DecoderState::close_segment(bool end_known) {
  open_->end_known = end_known;
  segments_.push_back(std::move(*open_));
  open_.reset();
  if (segments_.size() > kMaxSegments) {
    segments_.erase(segments_.begin());
    closed_votes_n_ = -1;  // force a rebuild from the retained segments
  }
  const auto n = expected_len();
  if (n && *n == closed_votes_n_) {
    add_segment_votes(segments_.back(), *n, closed_votes_);
  } else {
    rebuild_closed_votes();
  }
}

void DecoderState::rebuild_closed_votes() {
  const auto n = expected_len();
  closed_votes_.clear();
  closed_votes_n_ = n.value_or(-1);
  if (!n) return;
  closed_votes_.resize(static_cast<std::size_t>(*n));
  for (const auto& seg : segments_) add_segment_votes(seg, *n, closed_votes_);
}

void DecoderState::add_segment_votes(const Segment& seg, int n, Votes& votes) const {
  auto vote = [&](int index, int value, int weight) {
    votes[static_cast<std::size_t>(index)][static_cast<std::uint8_t>(value)] += weight;
  };
  // VAL_k is sent after IDX_k and before IDX_{k+1}, so a run of VALs between
  // anchors lo and hi occupies indices in [lo, hi).
  for_each_run(seg, n, [&](std::optional<int> lo, std::optional<int> hi, const std::vector<int>& run) {
    const int m = static_cast<int>(run.size());
    if (lo && hi) {
      const int span = *hi - *lo;
      if (span == m) {
        for (int j = 0; j < m; ++j) vote(*lo + j, run[j], kCertainWeight);
      } else if (span > m) {
        vote(*lo, run.front(), kWeakWeight);
        vote(*hi - 1, run.back(), kWeakWeight);
      }
      // span < m cannot come from drops and duplicates; ignore it
    } else if (lo && *lo < n) {
      vote(*lo, run.front(), kWeakWeight);
    } else if (hi && *hi >= 1) {
      vote(*hi - 1, run.back(), kWeakWeight);
    }
  });
}

std::map<int, std::uint8_t> DecoderState::slots() const {
  std::map<int, std::uint8_t> out;
  const auto n = expected_len();
  if (!n) return out;
  Votes votes = closed_votes_n_ == *n ? closed_votes_ : Votes{};
  if (closed_votes_n_ != *n) {
    votes.resize(static_cast<std::size_t>(*n));
    for (const auto& seg : segments_) add_segment_votes(seg, *n, votes);
  }
  if (open_) add_segment_votes(*open_, *n, votes);
  for (int i = 0; i < *n; ++i)
    if (auto best = argmax(votes[static_cast<std::size_t>(i)])) out[i] = static_cast<std::uint8_t>(*best);
  return out;
}

void DecoderState::try_complete() {
  const auto n = expected_len();
  const auto crc = crc_seen();
  if (!n || !crc || *n < 1) return;
  if (closed_votes_n_ != *n) rebuild_closed_votes();

  Votes open_votes(static_cast<std::size_t>(*n));
  if (open_) add_segment_votes(*open_, *n, open_votes);

  // Only certain evidence is trusted. Weak votes are never used to complete:
  // every weak guess tested against an 8-bit checksum is another chance of a
  // false match.
  std::vector<std::optional<std::uint8_t>> known(static_cast<std::size_t>(*n));
  bool conflict = false;
  int unknowns = 0;
  for (std::size_t i = 0; i < known.size(); ++i) {
    std::map<std::uint8_t, int> certain;
    for (const auto* votes : {&closed_votes_[i], &open_votes[i]})
      for (const auto& [value, weight] : *votes)
        if (weight >= kCertainWeight) certain[value] += weight / kCertainWeight;
    if (certain.empty()) {
      ++unknowns;
      continue;
    }
    conflict |= certain.size() > 1;
    known[i] = *argmax(certain);
  }

  if (unknowns > 1) {
    // Short runs between anchors pin further slots once their neighbours
    // are known. Repeat until nothing changes.
    const auto runs = collect_runs(segments_, open_, *n);
    for (bool changed = true; changed;) {
      changed = false;
      for (const auto& r : runs) changed |= propagate(r, known);
    }
    unknowns = static_cast<int>(std::count(known.begin(), known.end(), std::nullopt));
    if (unknowns > 1) {
      if (conflict || segments_.size() == searched_segments_) return;
      searched_segments_ = segments_.size();
      search(known, *crc);
      return;
    }
  }

  std::vector<std::uint8_t> payload(known.size());
  std::optional<std::size_t> unknown;
  for (std::size_t i = 0; i < known.size(); ++i) {
    if (known[i])
      payload[i] = *known[i];
    else
      unknown = i;
  }

  auto accept = [&](std::vector<std::uint8_t> candidate) {
    try {
      parse_payload_fields(candidate);
    } catch (const Error&) {
      return false;
    }
    payload_ = std::move(candidate);
    phase_ = Phase::Complete;
    return true;
  };

  if (unknown) {
    // A single unknown byte is fully determined by the CRC: crc8 detects
    // every single-byte error, so exactly one value matches.
    for (int b = 0; b < 256; ++b) {
      payload[*unknown] = static_cast<std::uint8_t>(b);
      if (crc8(payload) == *crc) {
        accept(payload);
        return;
      }
    }
    return;
  }

  if (crc8(payload) == *crc) {
    if (!accept(payload) && !conflict && crc_votes_.size() == 1) phase_ = Phase::Failed;
  } else if (!conflict && crc_votes_.size() == 1) {
    // every slot is pinned by unambiguous evidence, yet the checksum disagrees
    phase_ = Phase::Failed;
  }
}

bool DecoderState::search(const std::vector<std::optional<std::uint8_t>>& known, std::uint8_t crc) {
  // Several slots are still open. A VAL that can only sit in open slots
  // certainly belongs to one of them. Open slots linked by such VALs form a
  // group; when a group of k slots holds k distinct values its bytes are
  // exactly those values in some order, and with k-1 values one byte is
  // left for the CRC (at most one such group overall). Every layout is then
  // tried and the result kept only if exactly one payload survives.
  const int n = static_cast<int>(known.size());
  const auto runs = collect_runs(segments_, open_, n);

  std::vector<std::size_t> parent(known.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };

  struct Sighting {
    std::uint8_t value;
    std::vector<std::size_t> slots;
  };

  std::vector<Sighting> sightings;
  for (const auto& r : runs) {
    const auto ok = feasible(r, known);
    for (std::size_t j = 0; j < ok.size(); ++j) {
      Sighting sg{static_cast<std::uint8_t>(r.values[j]), {}};
      bool only_open = true;
      for (std::size_t p = 0; p < ok[j].size(); ++p) {
        if (!ok[j][p]) continue;
        const auto slot = static_cast<std::size_t>(r.lo) + p;
        if (known[slot]) only_open = false;
        sg.slots.push_back(slot);
      }
      if (sg.slots.empty()) return false;  // evidence contradicts the known slots
      if (!only_open) continue;
      for (auto slot : sg.slots) parent[root(slot)] = root(sg.slots.front());
      sightings.push_back(std::move(sg));
    }
  }

  struct Group {
    std::vector<std::size_t> slots;
    std::vector<std::uint8_t> values;
    std::map<std::uint8_t, std::vector<std::size_t>> allowed;  // value -> slots
  };
  std::map<std::size_t, Group> groups;
  for (std::size_t i = 0; i < known.size(); ++i)
    if (!known[i]) groups[root(i)].slots.push_back(i);
  for (const auto& sg : sightings) {
    auto& g = groups[root(sg.slots.front())];
    if (std::find(g.values.begin(), g.values.end(), sg.value) == g.values.end()) g.values.push_back(sg.value);
    auto& al = g.allowed[sg.value];
    for (auto slot : sg.slots)
      if (std::find(al.begin(), al.end(), slot) == al.end()) al.push_back(slot);
  }

  // Per group, every bijection of its values onto its slots that puts each
  // value where one of its sightings allows; kFree marks the CRC byte.
  constexpr int kFree = -1;
  std::vector<const Group*> order;
  std::vector<std::vector<std::vector<int>>> layouts;
  int free_groups = 0;
  std::size_t combos = 1;
  for (const auto& [_, g] : groups) {
    const std::size_t k = g.slots.size();
    if (k > kMaxSearchUnknowns) return false;
    const bool partial = g.values.size() + 1 == k;
    if (!partial && g.values.size() != k) return false;
    if (partial && ++free_groups > 1) return false;

    std::vector<std::vector<int>> out;
    std::vector<int> layout(k, kFree);
    std::vector<char> used(k, 0);
    auto place = [&](auto&& self, std::size_t vi) -> void {
      if (out.size() > kMaxSearchCandidates) return;
      if (vi == g.values.size()) {
        out.push_back(layout);
        return;
      }
      const auto v = g.values[vi];
      for (auto slot : g.allowed.at(v)) {
        const auto s = static_cast<std::size_t>(std::find(g.slots.begin(), g.slots.end(), slot) - g.slots.begin());
        if (used[s]) continue;
        used[s] = 1;
        layout[s] = v;
        self(self, vi + 1);
        layout[s] = kFree;
        used[s] = 0;
      }
    };
    place(place, 0);
    if (out.empty()) return false;
    combos *= out.size();
    if (combos > kMaxSearchCandidates) return false;
    order.push_back(&g);
    layouts.push_back(std::move(out));
  }

  std::vector<std::uint8_t> payload(known.size());
  for (std::size_t i = 0; i < known.size(); ++i)
    if (known[i]) payload[i] = *known[i];

  std::optional<std::vector<std::uint8_t>> found;
  std::vector<std::size_t> pick(order.size(), 0);
  for (std::size_t c = 0; c < combos; ++c) {
    std::optional<std::size_t> free_slot;
    for (std::size_t g = 0; g < order.size(); ++g)
      for (std::size_t s = 0; s < order[g]->slots.size(); ++s) {
        const int v = layouts[g][pick[g]][s];
        if (v == kFree)
          free_slot = order[g]->slots[s];
        else
          payload[order[g]->slots[s]] = static_cast<std::uint8_t>(v);
      }
    for (std::size_t g = 0; g < order.size() && ++pick[g] == layouts[g].size(); ++g) pick[g] = 0;

    if (free_slot) {
      bool solved = false;
      for (int b = 0; b < 256 && !solved; ++b) {
        payload[*free_slot] = static_cast<std::uint8_t>(b);
        solved = crc8(payload) == crc;
      }
      if (!solved) continue;
    } else if (crc8(payload) != crc) {
      continue;
    }
    if (!std::all_of(runs.begin(), runs.end(), [&](const Run& r) { return consistent(r, payload); })) continue;
    try {
      parse_payload_fields(payload);
    } catch (const Error&) {
      continue;
    }
    if (found && *found != payload) return false;  // ambiguous
    found = payload;
  }
  if (!found) return false;
  payload_ = std::move(*found);
  phase_ = Phase::Complete;
  return true;
}

std::optional<Credentials> DecoderState::credentials() const {
  if (phase_ != Phase::Complete) return std::nullopt;
  try {
    return parse_payload(payload_);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::optional<Credentials> DecoderState::fields() const {
  if (phase_ != Phase::Complete) return std::nullopt;
  return parse_payload_fields(payload_);
}

DecoderState decoder_feed(DecoderState state, int length) {
  state.feed(length);
  return state;
}

}  // namespace provlab::dpl
