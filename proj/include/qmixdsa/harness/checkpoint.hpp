#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qmixdsa/harness/config.hpp"
#include "qmixdsa/rng.hpp"

namespace qmixdsa::harness {

inline constexpr const char* kCheckpointMagic = "QMIXDSA-CKPT v1";

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

// Text header (magic, config snapshot, array directory) followed by the
// arrays as little-endian IEEE-754 binary64 in directory order.
struct Checkpoint {
  ExperimentConfig config;
  std::vector<NamedArray> arrays;

  void add(const std::string& name, std::vector<std::size_t> shape,
           std::vector<double> values);
  void add_scalar(const std::string& name, double value);
  const NamedArray* find(const std::string& name) const;
  // DataError naming the array when absent or of unexpected size.
  const NamedArray& require(const std::string& name) const;
  const NamedArray& require(const std::string& name, std::size_t size) const;
  double scalar(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// Loads and fully validates; no partial state escapes on error.
Checkpoint load_checkpoint(const std::string& path);

// Rng state <-> doubles (two 32-bit halves per word, exactly representable).
std::vector<double> rng_to_doubles(const Rng& rng);
Rng rng_from_doubles(std::span<const double> words);

}  // namespace qmixdsa::harness
