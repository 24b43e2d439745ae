#include "qmixdsa/qmixcore/replay.hpp"

#include "qmixdsa/error.hpp"

namespace qmixdsa::qmixcore {

EpisodeRecord EpisodeRecord::empty(int slots, int channels, int agents) {
  if (slots < 1 || channels < 1 || agents < 1) {
    throw ConfigError("episode dimensions must be positive");
  }
  EpisodeRecord e;
  e.slots = slots;
  e.channels = channels;
  e.agents = agents;
  e.states.assign(static_cast<std::size_t>(slots + 1) * channels, 0);
  e.obs.assign(static_cast<std::size_t>(slots + 1) * agents * channels, -1);
  e.actions.assign(static_cast<std::size_t>(slots) * agents, 0);
  e.rewards.assign(static_cast<std::size_t>(slots) * agents, 0);
  return e;
}

std::span<const std::uint8_t> EpisodeRecord::state(int t) const {
  const auto* p = reinterpret_cast<const std::uint8_t*>(states.data());
  return {p + static_cast<std::size_t>(t) * channels,
          static_cast<std::size_t>(channels)};
}

std::span<const std::int8_t> EpisodeRecord::observation(int t,
                                                        int agent) const {
  const std::size_t off =
      (static_cast<std::size_t>(t) * agents + agent) * channels;
  return {obs.data() + off, static_cast<std::size_t>(channels)};
}

std::int32_t EpisodeRecord::action(int t, int agent) const {
  return actions[static_cast<std::size_t>(t) * agents + agent];
}

int EpisodeRecord::reward(int t, int agent) const {
  return rewards[static_cast<std::size_t>(t) * agents + agent];
}

int EpisodeRecord::slot_total_reward(int t) const {
  int sum = 0;
  for (int n = 0; n < agents; ++n) sum += reward(t, n);
  return sum;
}

int EpisodeRecord::total_reward() const {
  int sum = 0;
  for (auto r : rewards) sum += r;
  return sum;
}

std::span<std::int8_t> EpisodeRecord::mutable_state(int t) {
  return {states.data() + static_cast<std::size_t>(t) * channels,
          static_cast<std::size_t>(channels)};
}

std::span<std::int8_t> EpisodeRecord::mutable_observation(int t, int agent) {
  const std::size_t off =
      (static_cast<std::size_t>(t) * agents + agent) * channels;
  return {obs.data() + off, static_cast<std::size_t>(channels)};
}

void EpisodeRecord::set_action(int t, int agent, std::int32_t a) {
  actions[static_cast<std::size_t>(t) * agents + agent] = a;
}

void EpisodeRecord::set_reward(int t, int agent, int r) {
  rewards[static_cast<std::size_t>(t) * agents + agent] =
      static_cast<std::int8_t>(r);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
  episodes_.reserve(capacity);
}

void ReplayBuffer::store(EpisodeRecord episode) {
  if (episodes_.size() < capacity_) {
    episodes_.push_back(std::move(episode));
  } else {
    // Overwrite the oldest slot.
    episodes_[head_] = std::move(episode);
    head_ = (head_ + 1) % capacity_;
  }
}

const EpisodeRecord& ReplayBuffer::at(std::size_t age_index) const {
  if (age_index >= episodes_.size()) {
    throw UsageError("replay buffer index out of range");
  }
  return episodes_[(head_ + age_index) % episodes_.size()];
}

std::vector<const EpisodeRecord*> ReplayBuffer::sample(std::size_t batch,
                                                       Rng& rng) const {
  if (episodes_.empty()) {
    throw UsageError("cannot sample from an empty replay buffer");
  }
  std::vector<const EpisodeRecord*> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const int j = rng.uniform_int(static_cast<int>(episodes_.size()));
    out.push_back(&episodes_[static_cast<std::size_t>(j)]);
  }
  return out;
}

void ReplayBuffer::clear() {
  episodes_.clear();
  head_ = 0;
}

}  // namespace qmixdsa::qmixcore
