#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "provlab/netsim.hpp"
#include "provlab/random.hpp"

namespace provlab {

/// Something that consumes broker events. poll() must not block; it returns
/// true when it made progress.
class Actor {
 public:
  virtual ~Actor() = default;
  virtual bool poll() = 0;
};

/// Owns the clock and broker and drives registered actors in a fixed order,
/// which keeps every run with the same seed identical.
class Simulation {
 public:
  explicit Simulation(netsim::LossModel loss = {}, std::int64_t start_time = 1613163767);

  SimClock& clock() { return clock_; }
  netsim::Broker& broker() { return broker_; }
  const netsim::Broker& broker() const { return broker_; }

  void add(Actor& actor);
  void remove(Actor& actor);

  /// One pass over all actors.
  bool step();
  /// Steps until no actor makes progress. Returns the number of passes.
  std::size_t run_until_idle(std::size_t max_passes = 100000);
  /// Steps until `done` holds or the system goes idle.
  bool run_until(const std::function<bool()>& done, std::size_t max_passes = 100000);

 private:
  SimClock clock_;
  netsim::Broker broker_;
  std::vector<Actor*> actors_;
};

}  // namespace provlab
