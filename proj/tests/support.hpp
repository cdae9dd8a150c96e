#pragma once

#include <string>
#include <vector>

#include "provlab/dpl.hpp"
#include "provlab/netsim.hpp"
#include "provlab/random.hpp"
#include "provlab/simulation.hpp"

namespace provlab::testing {

inline std::string random_text(Rng& rng, std::size_t min_len, std::size_t max_len) {
  static constexpr std::string_view kChars =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-. !#@";
  const auto n = min_len + rng.below(max_len - min_len + 1);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += kChars[rng.below(kChars.size())];
  return s;
}

inline dpl::Credentials random_credentials(Rng& rng) {
  return {random_text(rng, 1, 32), random_text(rng, 8, 64), rng.alnum(32)};
}

// Pushes a length sequence through a one-listener broadcast network and
// returns the lengths the listener saw.
inline std::vector<int> transmit(const std::vector<int>& lengths, netsim::LossModel loss) {
  Simulation sim(loss);
  auto& broker = sim.broker();
  broker.create_network("lab", "password123");
  auto tx = broker.register_endpoint("tx", netsim::Role::app);
  auto rx = broker.register_endpoint("rx", netsim::Role::device);
  broker.join(tx, "lab", "password123");
  broker.join(rx, "lab", "password123");
  for (int len : lengths) {
    std::vector<std::uint8_t> filler(static_cast<std::size_t>(len), netsim::kFillerByte);
    broker.broadcast(tx, dpl::kPort, filler);
  }
  std::vector<int> out;
  for (auto& ev : broker.drain(rx)) out.push_back(static_cast<int>(std::get<netsim::Datagram>(ev).payload.size()));
  return out;
}

inline dpl::DecoderState decode(const std::vector<int>& lengths) {
  dpl::DecoderState st;
  for (int len : lengths) {
    st.feed(len);
    if (st.phase() == dpl::DecoderState::Phase::Complete) break;
  }
  return st;
}

}  // namespace provlab::testing
