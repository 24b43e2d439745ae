#include "qmixdsa/envsim/channels.hpp"

#include <fstream>
#include <sstream>

#include "qmixdsa/error.hpp"

namespace qmixdsa::envsim {

MarkovChannelSet init_markov(int channels, Rng& rng, double lo, double hi) {
  if (channels <= 0) throw ConfigError("init_markov: channel count must be positive");
  if (!(0.0 < lo && lo < hi && hi < 1.0)) {
    throw ConfigError("init_markov: require 0 < lo < hi < 1");
  }
  MarkovChannelSet m;
  m.busy_to_idle.resize(channels);
  m.idle_to_busy.resize(channels);
  for (int k = 0; k < channels; ++k) {
    m.busy_to_idle[k] = rng.uniform(lo, hi);
    m.idle_to_busy[k] = rng.uniform(lo, hi);
  }
  return m;
}

MarkovChannelSet init_markov(int channels, std::uint64_t seed, double lo,
                             double hi) {
  Rng rng(seed);
  return init_markov(channels, rng, lo, hi);
}

// ---- MarkovChannels ----

MarkovChannels::MarkovChannels(MarkovChannelSet model)
    : model_(std::move(model)), state_(model_.channel_count(), 0) {}

void MarkovChannels::init(Rng& rng) {
  for (int k = 0; k < channel_count(); ++k) {
    state_[k] = rng.uniform01() < model_.stationary_idle(k) ? 1 : 0;
  }
}

ChannelState MarkovChannels::step(Rng& rng) {
  for (int k = 0; k < channel_count(); ++k) {
    const double p_idle = state_[k] == 1 ? 1.0 - model_.idle_to_busy[k]
                                         : model_.busy_to_idle[k];
    state_[k] = rng.uniform01() < p_idle ? 1 : 0;
  }
  return state_;
}

std::unique_ptr<Environment> MarkovChannels::clone() const {
  return std::make_unique<MarkovChannels>(*this);
}

void MarkovChannels::save_dynamic(std::vector<double>& out) const {
  for (auto s : state_) out.push_back(s);
}

void MarkovChannels::load_dynamic(std::span<const double> in) {
  if (in.size() != state_.size()) {
    throw DataError("markov channel state size mismatch");
  }
  for (std::size_t k = 0; k < state_.size(); ++k) {
    state_[k] = in[k] != 0.0 ? 1 : 0;
  }
}

// ---- PeriodicChannels ----

PeriodicChannels::PeriodicChannels(int channels, double switch_prob)
    : channels_(channels), group_size_(channels / 4), switch_prob_(switch_prob) {
  if (channels <= 0 || channels % 4 != 0) {
    throw ConfigError("periodic channels require a channel count divisible by 4");
  }
  if (switch_prob < 0.0 || switch_prob > 1.0) {
    throw ConfigError("periodic switch probability must be in [0, 1]");
  }
}

void PeriodicChannels::init(Rng& rng) {
  (void)rng;
  group_ = 0;
}

ChannelState PeriodicChannels::step(Rng& rng) {
  if (rng.uniform01() < switch_prob_) group_ = (group_ + 1) % 4;
  return current();
}

ChannelState PeriodicChannels::current() const {
  ChannelState s(channels_, 0);
  for (int k = group_ * group_size_; k < (group_ + 1) * group_size_; ++k) {
    s[k] = 1;
  }
  return s;
}

std::unique_ptr<Environment> PeriodicChannels::clone() const {
  return std::make_unique<PeriodicChannels>(*this);
}

void PeriodicChannels::save_dynamic(std::vector<double>& out) const {
  out.push_back(group_);
}

void PeriodicChannels::load_dynamic(std::span<const double> in) {
  if (in.size() != 1) throw DataError("periodic channel state size mismatch");
  const int g = static_cast<int>(in[0]);
  if (g < 0 || g >= 4) throw DataError("periodic idle group out of range");
  group_ = g;
}

// ---- CorrelatedChannels ----

CorrelatedChannels::CorrelatedChannels(int channels, double flip_prob,
                                       Rng& structure_rng)
    : channels_(channels), flip_prob_(flip_prob) {
  if (channels < 4) {
    throw ConfigError("correlated channels require at least 4 channels");
  }
  if (flip_prob <= 0.0 || flip_prob >= 1.0) {
    throw ConfigError("correlated flip probability must be in (0, 1)");
  }
  subset_.resize(channels);
  invert_.resize(channels);
  // Four contiguous subsets; remainders widen the leading subsets.
  const int base = channels / 4, extra = channels % 4;
  int k = 0;
  for (int s = 0; s < 4; ++s) {
    const int size = base + (s < extra ? 1 : 0);
    for (int i = 0; i < size; ++i, ++k) {
      subset_[k] = s;
      // First channel per subset is the leader and always tracks itself.
      invert_[k] = (i == 0) ? 0 : (structure_rng.bernoulli(0.5) ? 1 : 0);
    }
  }
  leaders_.assign(4, 0);
}

void CorrelatedChannels::init(Rng& rng) {
  for (auto& l : leaders_) l = rng.bernoulli(0.5) ? 1 : 0;
}

ChannelState CorrelatedChannels::step(Rng& rng) {
  for (auto& l : leaders_) {
    if (rng.uniform01() < flip_prob_) l ^= 1;
  }
  ChannelState s = materialize();
  check_structure(s);
  return s;
}

ChannelState CorrelatedChannels::current() const { return materialize(); }

ChannelState CorrelatedChannels::materialize() const {
  ChannelState s(channels_);
  for (int k = 0; k < channels_; ++k) {
    s[k] = leaders_[subset_[k]] ^ invert_[k];
  }
  return s;
}

void CorrelatedChannels::check_structure(const ChannelState& s) const {
  for (int k = 0; k < channels_; ++k) {
    const std::uint8_t expect = leaders_[subset_[k]] ^ invert_[k];
    if (s[k] != expect) {
      throw NumericError("correlated channel structure violated");
    }
  }
}

std::unique_ptr<Environment> CorrelatedChannels::clone() const {
  return std::make_unique<CorrelatedChannels>(*this);
}

void CorrelatedChannels::save_dynamic(std::vector<double>& out) const {
  for (auto l : leaders_) out.push_back(l);
}

void CorrelatedChannels::load_dynamic(std::span<const double> in) {
  if (in.size() != leaders_.size()) {
    throw DataError("correlated channel state size mismatch");
  }
  for (std::size_t i = 0; i < leaders_.size(); ++i) {
    leaders_[i] = in[i] != 0.0 ? 1 : 0;
  }
}

// ---- Traces ----

TraceTable load_trace(const std::string& path, int channels) {
  if (channels <= 0) throw ConfigError("load_trace: channel count must be positive");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError("trace file is empty: " + path);

  // Validate the header shape: slot,ch1,...,chK.
  {
    std::stringstream ss(line);
    std::string field;
    int cols = 0;
    while (std::getline(ss, field, ',')) ++cols;
    if (cols != channels + 1) {
      throw DataError("trace header has " + std::to_string(cols) +
                      " columns, expected " + std::to_string(channels + 1));
    }
  }

  TraceTable table;
  table.channels = channels;
  int row_number = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row_number;
    std::stringstream ss(line);
    std::string field;
    int col = 0;
    while (std::getline(ss, field, ',')) {
      if (col > 0) {
        if (field == "0") {
          table.rows.push_back(0);
        } else if (field == "1") {
          table.rows.push_back(1);
        } else {
          throw DataError("trace row " + std::to_string(row_number) +
                          ": entry '" + field + "' is not 0 or 1");
        }
      }
      ++col;
    }
    if (col != channels + 1) {
      throw DataError("trace row " + std::to_string(row_number) + ": has " +
                      std::to_string(col) + " columns, expected " +
                      std::to_string(channels + 1));
    }
  }
  return table;
}

void save_trace(const std::string& path, const TraceTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open trace file for writing: " + path);
  out << "slot";
  for (int k = 1; k <= table.channels; ++k) out << ",ch" << k;
  out << "\n";
  for (int t = 0; t < table.slot_count(); ++t) {
    out << t + 1;
    for (auto v : table.row(t)) out << ',' << static_cast<int>(v);
    out << "\n";
  }
  if (!out) throw DataError("failed writing trace file: " + path);
}

TraceChannels::TraceChannels(TraceTable table) : table_(std::move(table)) {
  if (table_.slot_count() == 0) {
    throw ConfigError("trace environment requires a non-empty trace");
  }
}

void TraceChannels::init(Rng& rng) {
  (void)rng;
  cursor_ = -1;
}

ChannelState TraceChannels::step(Rng& rng) {
  (void)rng;
  if (cursor_ + 1 >= table_.slot_count()) {
    throw DataError("trace exhausted after " +
                    std::to_string(table_.slot_count()) + " slots");
  }
  ++cursor_;
  return current();
}

ChannelState TraceChannels::current() const {
  const int at = cursor_ < 0 ? 0 : cursor_;
  auto row = table_.row(at);
  return ChannelState(row.begin(), row.end());
}

std::unique_ptr<Environment> TraceChannels::clone() const {
  return std::make_unique<TraceChannels>(*this);
}

void TraceChannels::save_dynamic(std::vector<double>& out) const {
  out.push_back(cursor_);
}

void TraceChannels::load_dynamic(std::span<const double> in) {
  if (in.size() != 1) throw DataError("trace state size mismatch");
  const int c = static_cast<int>(in[0]);
  if (c < -1 || c >= table_.slot_count()) {
    throw DataError("trace cursor out of range");
  }
  cursor_ = c;
}

// ---- SwitchingChannels ----

SwitchingChannels::SwitchingChannels(std::unique_ptr<Environment> first,
                                     std::unique_ptr<Environment> second,
                                     int switch_epoch)
    : first_(std::move(first)),
      second_(std::move(second)),
      switch_epoch_(switch_epoch) {
  if (!first_ || !second_) throw ConfigError("switching env requires two environments");
  if (first_->channel_count() != second_->channel_count()) {
    throw ConfigError("switching env channel counts differ");
  }
  if (switch_epoch_ < 1) throw ConfigError("switch epoch must be >= 1");
}

void SwitchingChannels::init(Rng& rng) {
  first_->init(rng);
  on_second_ = false;
  second_initialized_ = false;
}

void SwitchingChannels::begin_epoch(int epoch) {
  on_second_ = epoch >= switch_epoch_;
}

ChannelState SwitchingChannels::step(Rng& rng) {
  if (on_second_ && !second_initialized_) {
    second_->init(rng);
    second_initialized_ = true;
  }
  return active().step(rng);
}

ChannelState SwitchingChannels::current() const { return active().current(); }

std::unique_ptr<Environment> SwitchingChannels::clone() const {
  auto copy = std::make_unique<SwitchingChannels>(first_->clone(),
                                                  second_->clone(),
                                                  switch_epoch_);
  copy->on_second_ = on_second_;
  copy->second_initialized_ = second_initialized_;
  return copy;
}

void SwitchingChannels::save_dynamic(std::vector<double>& out) const {
  out.push_back(on_second_ ? 1.0 : 0.0);
  out.push_back(second_initialized_ ? 1.0 : 0.0);
  std::vector<double> a, b;
  first_->save_dynamic(a);
  second_->save_dynamic(b);
  out.push_back(static_cast<double>(a.size()));
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
}

void SwitchingChannels::load_dynamic(std::span<const double> in) {
  if (in.size() < 3) throw DataError("switching env state too short");
  on_second_ = in[0] != 0.0;
  second_initialized_ = in[1] != 0.0;
  const std::size_t a_len = static_cast<std::size_t>(in[2]);
  if (3 + a_len > in.size()) throw DataError("switching env state truncated");
  first_->load_dynamic(in.subspan(3, a_len));
  second_->load_dynamic(in.subspan(3 + a_len));
}

std::unique_ptr<Environment> make_switching_env(
    std::unique_ptr<Environment> first, std::unique_ptr<Environment> second,
    int switch_epoch) {
  return std::make_unique<SwitchingChannels>(std::move(first),
                                             std::move(second), switch_epoch);
}

}  // namespace qmixdsa::envsim
