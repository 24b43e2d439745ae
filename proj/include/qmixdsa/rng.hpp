#pragma once

#include <array>
#include <cstdint>

namespace qmixdsa {

// xoshiro256++ generator. Self-contained so that streams are bit-reproducible
// across platforms and can be serialized exactly into checkpoints.
//
// Every source of randomness in a run owns one Rng derived from the single
// experiment seed via derive(master_seed, stream_id); the stream ids are fixed
// constants, so a seed pins the entire run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  static Rng derive(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01();

  double uniform(double lo, double hi);

  // Uniform in [0, n), unbiased (rejection sampling). n must be positive.
  int uniform_int(int n);

  bool bernoulli(double p) { return uniform01() < p; }

  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

// splitmix64 mix step, also used for seed expansion and stream derivation.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace qmixdsa
