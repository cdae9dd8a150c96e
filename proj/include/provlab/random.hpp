#pragma once

#include <atomic>
#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace provlab {

/// Seeded randomness shared by emulators. Every component that needs
/// randomness owns one of these, so a scenario seed fully determines a run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t below(std::uint64_t bound);
  void fill(std::span<std::uint8_t> out);

  /// `length` characters drawn from [a-z0-9].
  std::string alnum(std::size_t length);
  std::string hex(std::size_t length);

  /// Child generator with an independent stream, keyed by `salt`.
  Rng fork(std::string_view salt);

 private:
  std::mt19937_64 engine_;
};

/// Injected simulated clock, unix seconds. Never reads wall time.
class SimClock {
 public:
  explicit SimClock(std::int64_t start = 1613163767) : now_(start) {}

  std::int64_t now() const noexcept { return now_.load(); }
  void set(std::int64_t t) noexcept { now_.store(t); }
  void advance(std::int64_t seconds) noexcept { now_.fetch_add(seconds); }

 private:
  std::atomic<std::int64_t> now_;
};

}  // namespace provlab
