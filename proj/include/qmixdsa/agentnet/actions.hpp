#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace qmixdsa::agentnet {

// The sensing-action space: all M-subsets of K channels, indexed
// lexicographically over strictly increasing subsets.
class ActionSpace {
 public:
  ActionSpace(int channels, int sense_size);

  int channels() const { return channels_; }
  int sense_size() const { return sense_size_; }
  std::uint64_t count() const { return count_; }

  // Index -> strictly increasing 0-based subset.
  std::vector<int> unrank(std::uint64_t index) const;

  // Inverse of unrank.
  std::uint64_t rank(std::span<const int> subset) const;

 private:
  std::uint64_t choose(int n, int k) const;

  int channels_;
  int sense_size_;
  std::uint64_t count_;
  std::vector<std::uint64_t> binom_;  // (channels+1) x (sense_size+1)
};

}  // namespace qmixdsa::agentnet
