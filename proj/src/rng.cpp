#include "qmixdsa/rng.hpp"

#include "qmixdsa/error.hpp"

namespace qmixdsa {

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& w : s_) w = splitmix64(sm);
}

Rng Rng::derive(std::uint64_t master_seed, std::uint64_t stream_id) {
  std::uint64_t sm = master_seed;
  std::uint64_t base = splitmix64(sm);
  std::uint64_t sid = stream_id;
  return Rng(base ^ splitmix64(sid));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw UsageError("uniform_int: n must be positive");
  const std::uint64_t un = static_cast<std::uint64_t>(n);
  // Lemire's multiply-shift with rejection to remove modulo bias.
  std::uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * un;
  std::uint64_t l = static_cast<std::uint64_t>(m);
  if (l < un) {
    const std::uint64_t threshold = (0 - un) % un;
    while (l < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * un;
      l = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<int>(m >> 64);
}

}  // namespace qmixdsa
