#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qmixdsa/envsim/channels.hpp"
#include "qmixdsa/rng.hpp"

namespace qmixdsa::envsim {

// Channel indices (0-based, strictly increasing) a user senses in one slot.
using SenseSet = std::vector<int>;

// One user's view of the slot: sensed channels reveal the true occupancy,
// everything else reads -1.
struct Observation {
  std::vector<std::int8_t> values;   // -1 unsensed, else 0/1
  std::vector<std::uint8_t> sensed;  // 1 where sensed

  int channel_count() const { return static_cast<int>(values.size()); }
};

Observation observe(std::span<const std::uint8_t> state, const SenseSet& sense);

constexpr int kRewardCollision = -1;
constexpr int kRewardSilent = 0;
constexpr int kRewardSuccess = 2;

struct SlotOutcome {
  std::vector<int> transmit_channel;   // -1 when silent
  std::vector<int> rewards;            // one of {-1, 0, +2}
  std::vector<int> transmitter_count;  // per channel
  int total_reward = 0;

  int user_count() const { return static_cast<int>(rewards.size()); }
};

// Listen-before-talk resolution: each user transmits on one of its sensed
// idle channels (uniformly at random when it has a choice) or stays silent.
// A channel with a single transmitter pays +2; with two or more, every
// transmitter on it pays -1. Busy channels are never transmitted on.
SlotOutcome resolve_slot(std::span<const std::uint8_t> state,
                         std::span<const SenseSet> joint_sense, Rng& rng);

int total_reward(const SlotOutcome& outcome);

// Maximum collision-free successes for one slot under full knowledge:
// min(users, idle channels).
int oracle_slot_bound(std::span<const std::uint8_t> state, int users);

}  // namespace qmixdsa::envsim
