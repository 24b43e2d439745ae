#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qmixdsa/rng.hpp"

namespace qmixdsa::qmixcore {

// One T-slot trajectory. Slot indices are 0-based; states and observations
// carry one extra row (index T) holding the bootstrap state and the
// observations produced by the final slot's sensing. obs row 0 is the
// all-unsensed view every episode starts from.
struct EpisodeRecord {
  int slots = 0;     // T
  int channels = 0;  // K
  int agents = 0;    // N

  std::vector<std::int8_t> states;   // (T+1) x K, 1 = idle
  std::vector<std::int8_t> obs;      // (T+1) x N x K, -1/0/1
  std::vector<std::int32_t> actions; // T x N
  std::vector<std::int8_t> rewards;  // T x N

  static EpisodeRecord empty(int slots, int channels, int agents);

  std::span<const std::uint8_t> state(int t) const;
  std::span<const std::int8_t> observation(int t, int agent) const;
  std::int32_t action(int t, int agent) const;
  int reward(int t, int agent) const;
  int slot_total_reward(int t) const;
  int total_reward() const;

  std::span<std::int8_t> mutable_state(int t);
  std::span<std::int8_t> mutable_observation(int t, int agent);
  void set_action(int t, int agent, std::int32_t a);
  void set_reward(int t, int agent, int r);
};

// FIFO episode store with uniform with-replacement sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }

  void store(EpisodeRecord episode);

  // Oldest first.
  const EpisodeRecord& at(std::size_t age_index) const;

  std::vector<const EpisodeRecord*> sample(std::size_t batch, Rng& rng) const;

  void clear();

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // index of the oldest episode
  std::vector<EpisodeRecord> episodes_;
};

}  // namespace qmixdsa::qmixcore
