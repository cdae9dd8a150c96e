#include "provlab/simulation.hpp"

#include <algorithm>

namespace provlab {

Simulation::Simulation(netsim::LossModel loss, std::int64_t start_time)
    : clock_(start_time), broker_(clock_, loss) {}

void Simulation::add(Actor& actor) {
  if (std::find(actors_.begin(), actors_.end(), &actor) == actors_.end()) actors_.push_back(&actor);
}

void Simulation::remove(Actor& actor) {
  actors_.erase(std::remove(actors_.begin(), actors_.end(), &actor), actors_.end());
}

bool Simulation::step() {
  bool progressed = false;
  // index loop: an actor may register another actor while polling
  for (std::size_t i = 0; i < actors_.size(); ++i) progressed |= actors_[i]->poll();
  return progressed;
}

std::size_t Simulation::run_until_idle(std::size_t max_passes) {
  std::size_t passes = 0;
  while (passes < max_passes && step()) ++passes;
  return passes;
}

bool Simulation::run_until(const std::function<bool()>& done, std::size_t max_passes) {
  for (std::size_t i = 0; i < max_passes; ++i) {
    if (done()) return true;
    if (!step()) return done();
  }
  return done();
}

}  // namespace provlab
