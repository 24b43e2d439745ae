#include "qmixdsa/agentnet/actions.hpp"

#include <string>

#include "qmixdsa/error.hpp"

namespace qmixdsa::agentnet {

ActionSpace::ActionSpace(int channels, int sense_size)
    : channels_(channels), sense_size_(sense_size) {
  if (channels < 1) throw ConfigError("action space: channels must be >= 1");
  if (sense_size < 1 || sense_size > channels) {
    throw ConfigError("action space: sense size must satisfy 1 <= M <= K");
  }
  // Pascal triangle up to C(channels, sense_size), clamped at sense_size.
  binom_.assign(static_cast<std::size_t>(channels + 1) * (sense_size + 1), 0);
  for (int n = 0; n <= channels; ++n) {
    for (int k = 0; k <= sense_size; ++k) {
      auto& cell = binom_[static_cast<std::size_t>(n) * (sense_size + 1) + k];
      if (k == 0) {
        cell = 1;
      } else if (k > n) {
        cell = 0;
      } else {
        cell = choose(n - 1, k - 1) + choose(n - 1, k);
      }
    }
  }
  count_ = choose(channels, sense_size);
}

std::uint64_t ActionSpace::choose(int n, int k) const {
  if (k < 0 || k > sense_size_ || n < 0) return 0;
  return binom_[static_cast<std::size_t>(n) * (sense_size_ + 1) + k];
}

std::vector<int> ActionSpace::unrank(std::uint64_t index) const {
  if (index >= count_) {
    throw UsageError("action index " + std::to_string(index) +
                     " out of range (count " + std::to_string(count_) + ")");
  }
  std::vector<int> subset;
  subset.reserve(sense_size_);
  int next = 0;
  std::uint64_t remaining = index;
  for (int pos = 0; pos < sense_size_; ++pos) {
    for (int v = next; v < channels_; ++v) {
      // Number of subsets starting with v at this position.
      const std::uint64_t block = choose(channels_ - 1 - v, sense_size_ - 1 - pos);
      if (remaining < block) {
        subset.push_back(v);
        next = v + 1;
        break;
      }
      remaining -= block;
    }
  }
  return subset;
}

std::uint64_t ActionSpace::rank(std::span<const int> subset) const {
  if (static_cast<int>(subset.size()) != sense_size_) {
    throw UsageError("rank: subset size mismatch");
  }
  std::uint64_t index = 0;
  int prev = -1;
  for (int pos = 0; pos < sense_size_; ++pos) {
    const int v = subset[pos];
    if (v <= prev || v >= channels_) {
      throw UsageError("rank: subset must be strictly increasing and in range");
    }
    for (int u = prev + 1; u < v; ++u) {
      index += choose(channels_ - 1 - u, sense_size_ - 1 - pos);
    }
    prev = v;
  }
  return index;
}

}  // namespace qmixdsa::agentnet
