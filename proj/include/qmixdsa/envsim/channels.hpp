#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qmixdsa/rng.hpp"

namespace qmixdsa::envsim {

// Per-channel occupancy for one slot: 1 = idle, 0 = busy.
using ChannelState = std::vector<std::uint8_t>;

// Per-channel two-state Markov transition probabilities, stored per the
// convention x = P(busy -> idle), y = P(idle -> busy). Row k of the full
// matrix form is [[1-x, x], [y, 1-y]].
struct MarkovChannelSet {
  std::vector<double> busy_to_idle;  // x
  std::vector<double> idle_to_busy;  // y

  int channel_count() const { return static_cast<int>(busy_to_idle.size()); }
  double stationary_idle(int k) const {
    const double x = busy_to_idle[k], y = idle_to_busy[k];
    return x / (x + y);
  }
};

// Draws switching probabilities uniformly in [lo, hi] for K channels.
MarkovChannelSet init_markov(int channels, std::uint64_t seed, double lo = 0.05,
                             double hi = 0.95);
MarkovChannelSet init_markov(int channels, Rng& rng, double lo = 0.05,
                             double hi = 0.95);

// One slotted channel process. Implementations own only their dynamic state;
// static structure (transition matrices, partitions) is fixed at construction
// so a cloned or checkpoint-restored instance replays identically.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int channel_count() const = 0;

  // Draws the initial occupancy (stationary where defined).
  virtual void init(Rng& rng) = 0;

  // Advances one slot and returns the new occupancy.
  virtual ChannelState step(Rng& rng) = 0;

  virtual ChannelState current() const = 0;

  // Called by the harness at the start of each epoch (1-based); only the
  // switching wrapper reacts.
  virtual void begin_epoch(int epoch) { (void)epoch; }

  virtual std::unique_ptr<Environment> clone() const = 0;

  // Dynamic state only, for checkpointing. Static structure is rebuilt from
  // the experiment config.
  virtual void save_dynamic(std::vector<double>& out) const = 0;
  virtual void load_dynamic(std::span<const double> in) = 0;
};

class MarkovChannels final : public Environment {
 public:
  explicit MarkovChannels(MarkovChannelSet model);

  int channel_count() const override { return model_.channel_count(); }
  void init(Rng& rng) override;
  ChannelState step(Rng& rng) override;
  ChannelState current() const override { return state_; }
  std::unique_ptr<Environment> clone() const override;
  void save_dynamic(std::vector<double>& out) const override;
  void load_dynamic(std::span<const double> in) override;

  const MarkovChannelSet& model() const { return model_; }

 private:
  MarkovChannelSet model_;
  ChannelState state_;
};

// Round-robin idle block: the channel set is split into four contiguous
// groups; exactly one group is idle per slot and advances to the next group
// with probability switch_prob at each slot boundary.
class PeriodicChannels final : public Environment {
 public:
  PeriodicChannels(int channels, double switch_prob);

  int channel_count() const override { return channels_; }
  void init(Rng& rng) override;
  ChannelState step(Rng& rng) override;
  ChannelState current() const override;
  std::unique_ptr<Environment> clone() const override;
  void save_dynamic(std::vector<double>& out) const override;
  void load_dynamic(std::span<const double> in) override;

  int idle_group() const { return group_; }

 private:
  int channels_;
  int group_size_;
  double switch_prob_;
  int group_ = 0;
};

// Four channel subsets, each driven by a leader following a symmetric
// two-state chain; every other channel in the subset copies or inverts its
// leader. Sign flags are drawn once at construction.
class CorrelatedChannels final : public Environment {
 public:
  // flip_prob is the leaders' symmetric transition probability.
  CorrelatedChannels(int channels, double flip_prob, Rng& structure_rng);

  int channel_count() const override { return channels_; }
  void init(Rng& rng) override;
  ChannelState step(Rng& rng) override;
  ChannelState current() const override;
  std::unique_ptr<Environment> clone() const override;
  void save_dynamic(std::vector<double>& out) const override;
  void load_dynamic(std::span<const double> in) override;

  int subset_of(int channel) const { return subset_[channel]; }
  bool inverted(int channel) const { return invert_[channel] != 0; }
  std::uint8_t leader_state(int subset) const { return leaders_[subset]; }

 private:
  ChannelState materialize() const;
  void check_structure(const ChannelState& s) const;

  int channels_;
  double flip_prob_;
  std::vector<int> subset_;           // channel -> subset index
  std::vector<std::uint8_t> invert_;  // channel -> 0 same / 1 inverse
  std::vector<std::uint8_t> leaders_; // subset -> leader occupancy
};

// Binary occupancy trace: rows = slots, columns = channels, 1 = idle.
struct TraceTable {
  int channels = 0;
  std::vector<std::uint8_t> rows;  // slot-major

  int slot_count() const {
    return channels == 0 ? 0 : static_cast<int>(rows.size()) / channels;
  }
  std::span<const std::uint8_t> row(int slot) const {
    return {rows.data() + static_cast<std::size_t>(slot) * channels,
            static_cast<std::size_t>(channels)};
  }
};

// Parses the canonical trace CSV: header `slot,ch1,...,chK`, one row per
// slot, entries 0/1. Malformed input raises DataError citing the data row.
TraceTable load_trace(const std::string& path, int channels);

// Writes a TraceTable in the same format (test and tooling support).
void save_trace(const std::string& path, const TraceTable& table);

class TraceChannels final : public Environment {
 public:
  explicit TraceChannels(TraceTable table);

  int channel_count() const override { return table_.channels; }
  void init(Rng& rng) override;
  ChannelState step(Rng& rng) override;  // DataError when exhausted
  ChannelState current() const override;
  std::unique_ptr<Environment> clone() const override;
  void save_dynamic(std::vector<double>& out) const override;
  void load_dynamic(std::span<const double> in) override;

  int cursor() const { return cursor_; }

 private:
  TraceTable table_;
  int cursor_ = -1;  // last consumed row
};

// Wraps two processes over the same channel set; epochs before switch_epoch
// use the first, later epochs the second. The flip is invisible to agents.
class SwitchingChannels final : public Environment {
 public:
  SwitchingChannels(std::unique_ptr<Environment> first,
                    std::unique_ptr<Environment> second, int switch_epoch);

  int channel_count() const override { return first_->channel_count(); }
  void init(Rng& rng) override;
  ChannelState step(Rng& rng) override;
  ChannelState current() const override;
  void begin_epoch(int epoch) override;
  std::unique_ptr<Environment> clone() const override;
  void save_dynamic(std::vector<double>& out) const override;
  void load_dynamic(std::span<const double> in) override;

  bool switched() const { return on_second_; }

 private:
  Environment& active() { return on_second_ ? *second_ : *first_; }
  const Environment& active() const { return on_second_ ? *second_ : *first_; }

  std::unique_ptr<Environment> first_;
  std::unique_ptr<Environment> second_;
  int switch_epoch_;
  bool on_second_ = false;
  bool second_initialized_ = false;
};

std::unique_ptr<Environment> make_switching_env(
    std::unique_ptr<Environment> first, std::unique_ptr<Environment> second,
    int switch_epoch);

}  // namespace qmixdsa::envsim
