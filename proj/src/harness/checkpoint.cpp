#include "qmixdsa/harness/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "qmixdsa/error.hpp"

namespace qmixdsa::harness {

void Checkpoint::add(const std::string& name, std::vector<std::size_t> shape,
                     std::vector<double> values) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  if (n != values.size()) {
    throw UsageError("checkpoint array '" + name + "': shape/value mismatch");
  }
  arrays.push_back({name, std::move(shape), std::move(values)});
}

void Checkpoint::add_scalar(const std::string& name, double value) {
  add(name, {1}, {value});
}

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const NamedArray& Checkpoint::require(const std::string& name) const {
  const NamedArray* a = find(name);
  if (a == nullptr) throw DataError("checkpoint is missing array '" + name + "'");
  return *a;
}

const NamedArray& Checkpoint::require(const std::string& name,
                                      std::size_t size) const {
  const NamedArray& a = require(name);
  if (a.values.size() != size) {
    throw DataError("checkpoint array '" + name + "' has " +
                    std::to_string(a.values.size()) + " values, expected " +
                    std::to_string(size));
  }
  return a;
}

double Checkpoint::scalar(const std::string& name) const {
  return require(name, 1).values[0];
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out << kCheckpointMagic << "\n";
  out << "config-begin\n" << serialize_config(ckpt.config) << "config-end\n";
  std::size_t total = 0;
  for (const auto& a : ckpt.arrays) {
    out << "array " << a.name << " " << a.shape.size();
    for (auto d : a.shape) out << " " << d;
    out << "\n";
    total += a.values.size();
  }
  out << "data " << total << "\n";
  for (const auto& a : ckpt.arrays) {
    out.write(reinterpret_cast<const char*>(a.values.data()),
              static_cast<std::streamsize>(a.values.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);

  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    throw DataError("not a supported checkpoint (bad magic/version): " + path);
  }
  if (!std::getline(in, line) || line != "config-begin") {
    throw DataError("checkpoint missing config section");
  }
  std::ostringstream config_text;
  while (std::getline(in, line) && line != "config-end") {
    config_text << line << "\n";
  }
  if (line != "config-end") throw DataError("checkpoint config section unterminated");

  Checkpoint ckpt;
  ckpt.config = parse_config_text(config_text.str());
  validate(ckpt.config);

  std::size_t total_declared = 0;
  bool have_data = false;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "array") {
      NamedArray a;
      std::size_t ndim = 0;
      if (!(ss >> a.name >> ndim)) throw DataError("checkpoint: malformed array line");
      a.shape.resize(ndim);
      std::size_t n = 1;
      for (auto& d : a.shape) {
        if (!(ss >> d)) throw DataError("checkpoint: malformed array shape for '" + a.name + "'");
        n *= d;
      }
      a.values.resize(n);
      total_declared += n;
      ckpt.arrays.push_back(std::move(a));
    } else if (tag == "data") {
      std::size_t total = 0;
      if (!(ss >> total) || total != total_declared) {
        throw DataError("checkpoint: data count does not match declared arrays");
      }
      have_data = true;
      break;
    } else {
      throw DataError("checkpoint: unexpected header line '" + line + "'");
    }
  }
  if (!have_data) throw DataError("checkpoint: missing data section");

  for (auto& a : ckpt.arrays) {
    in.read(reinterpret_cast<char*>(a.values.data()),
            static_cast<std::streamsize>(a.values.size() * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) !=
        a.values.size() * sizeof(double)) {
      throw DataError("checkpoint truncated while reading array '" + a.name +
                      "'");
    }
  }
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0) {
    throw DataError("checkpoint has trailing bytes after declared arrays");
  }
  return ckpt;
}

std::vector<double> rng_to_doubles(const Rng& rng) {
  std::vector<double> out;
  out.reserve(8);
  for (std::uint64_t w : rng.state()) {
    out.push_back(static_cast<double>(w >> 32));
    out.push_back(static_cast<double>(w & 0xffffffffULL));
  }
  return out;
}

Rng rng_from_doubles(std::span<const double> words) {
  if (words.size() != 8) throw DataError("rng state must hold 8 values");
  std::array<std::uint64_t, 4> state{};
  for (int i = 0; i < 4; ++i) {
    const auto hi = static_cast<std::uint64_t>(words[2 * i]);
    const auto lo = static_cast<std::uint64_t>(words[2 * i + 1]);
    state[static_cast<std::size_t>(i)] = (hi << 32) | lo;
  }
  Rng rng(0);
  rng.set_state(state);
  return rng;
}

}  // namespace qmixdsa::harness
