#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qmixdsa/envsim/channels.hpp"
#include "qmixdsa/envsim/slot.hpp"

namespace qmixdsa::baselines {

// Capacity accounting for one episode under full knowledge and free sense-set
// choice: per slot, at most min(users, idle channels) collision-free
// transmissions.
struct OracleReport {
  std::vector<int> idle_counts;    // per slot
  std::vector<int> max_successes;  // per slot, min(users, idle)
  int episode_total = 0;
  int demand_cap = 0;  // users * slots
};

OracleReport oracle_upper_bound(std::span<const envsim::ChannelState> states,
                                int users);

}  // namespace qmixdsa::baselines
