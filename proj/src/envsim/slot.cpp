#include "qmixdsa/envsim/slot.hpp"

#include <algorithm>

#include "qmixdsa/error.hpp"

namespace qmixdsa::envsim {

Observation observe(std::span<const std::uint8_t> state,
                    const SenseSet& sense) {
  const int channels = static_cast<int>(state.size());
  Observation obs;
  obs.values.assign(channels, -1);
  obs.sensed.assign(channels, 0);
  for (int k : sense) {
    if (k < 0 || k >= channels) {
      throw UsageError("observe: sensed channel out of range");
    }
    if (obs.sensed[k]) throw UsageError("observe: duplicate sensed channel");
    obs.sensed[k] = 1;
    obs.values[k] = static_cast<std::int8_t>(state[k]);
  }
  return obs;
}

SlotOutcome resolve_slot(std::span<const std::uint8_t> state,
                         std::span<const SenseSet> joint_sense, Rng& rng) {
  const int channels = static_cast<int>(state.size());
  const int users = static_cast<int>(joint_sense.size());
  SlotOutcome out;
  out.transmit_channel.assign(users, -1);
  out.rewards.assign(users, kRewardSilent);
  out.transmitter_count.assign(channels, 0);

  std::vector<int> idle_sensed;
  for (int n = 0; n < users; ++n) {
    idle_sensed.clear();
    for (int k : joint_sense[n]) {
      if (k < 0 || k >= channels) {
        throw UsageError("resolve_slot: sensed channel out of range");
      }
      if (state[k] == 1) idle_sensed.push_back(k);
    }
    if (idle_sensed.empty()) continue;
    const int pick = idle_sensed.size() == 1
                         ? idle_sensed[0]
                         : idle_sensed[rng.uniform_int(
                               static_cast<int>(idle_sensed.size()))];
    out.transmit_channel[n] = pick;
    out.transmitter_count[pick] += 1;
  }

  for (int n = 0; n < users; ++n) {
    const int ch = out.transmit_channel[n];
    if (ch < 0) continue;
    out.rewards[n] =
        out.transmitter_count[ch] == 1 ? kRewardSuccess : kRewardCollision;
  }
  out.total_reward = 0;
  for (int r : out.rewards) out.total_reward += r;
  return out;
}

int total_reward(const SlotOutcome& outcome) {
  int sum = 0;
  for (int r : outcome.rewards) sum += r;
  return sum;
}

int oracle_slot_bound(std::span<const std::uint8_t> state, int users) {
  int idle = 0;
  for (auto s : state) idle += s == 1 ? 1 : 0;
  return std::min(users, idle);
}

}  // namespace qmixdsa::envsim
