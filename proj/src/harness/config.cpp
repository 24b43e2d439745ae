#include "qmixdsa/harness/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "qmixdsa/error.hpp"

namespace qmixdsa::harness {

qmixcore::TrainSettings ExperimentConfig::train_settings() const {
  qmixcore::TrainSettings s;
  s.channels = K;
  s.agents = N;
  s.sense_size = M;
  s.slots = T;
  s.gamma = gamma;
  s.lr = alpha;
  s.batch_size = B;
  s.target_sync_interval = target_sync_interval;
  s.td_lambda = td_lambda;
  s.head_init_scale = head_init_scale;
  s.warmup_episodes = warmup_episodes;
  if (bootstrap == "taken") {
    s.bootstrap = qmixcore::BootstrapRule::TakenAction;
  } else if (bootstrap == "greedy_online") {
    s.bootstrap = qmixcore::BootstrapRule::GreedyOnline;
  } else if (bootstrap == "mixed") {
    s.bootstrap = qmixcore::BootstrapRule::Mixed;
  } else {
    s.bootstrap = qmixcore::BootstrapRule::GreedyTarget;
  }
  s.buffer_capacity = static_cast<std::size_t>(buffer_capacity);
  s.eps = epsilon_schedule();
  return s;
}

agentnet::EpsilonSchedule ExperimentConfig::epsilon_schedule() const {
  agentnet::EpsilonSchedule e;
  e.start = epsilon_start;
  e.end = epsilon_end;
  e.decay_steps = epsilon_decay_steps;
  return e;
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" +
                      value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key +
                      "': expected unsigned integer, got '" + value + "'");
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" +
                      value + "'");
  }
}

std::string parse_string(const std::string& key, const std::string& value) {
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
    return value.substr(1, value.size() - 2);
  }
  if (!value.empty() && value.front() != '"') return value;
  throw ConfigError("config key '" + key + "': malformed string value");
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_number) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(line_number) +
                        ": empty key or value");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("config key '" + key + "' given more than once");
    }

    if (key == "K") cfg.K = static_cast<int>(parse_int(key, value));
    else if (key == "N") cfg.N = static_cast<int>(parse_int(key, value));
    else if (key == "M") cfg.M = static_cast<int>(parse_int(key, value));
    else if (key == "T") cfg.T = static_cast<int>(parse_int(key, value));
    else if (key == "gamma") cfg.gamma = parse_real(key, value);
    else if (key == "alpha") cfg.alpha = parse_real(key, value);
    else if (key == "B") cfg.B = static_cast<int>(parse_int(key, value));
    else if (key == "epsilon_start") cfg.epsilon_start = parse_real(key, value);
    else if (key == "epsilon_end") cfg.epsilon_end = parse_real(key, value);
    else if (key == "epsilon_decay_steps") cfg.epsilon_decay_steps = parse_int(key, value);
    else if (key == "target_sync_interval") cfg.target_sync_interval = static_cast<int>(parse_int(key, value));
    else if (key == "td_lambda") cfg.td_lambda = parse_real(key, value);
    else if (key == "bootstrap") cfg.bootstrap = parse_string(key, value);
    else if (key == "head_init_scale") cfg.head_init_scale = parse_real(key, value);
    else if (key == "warmup_episodes") cfg.warmup_episodes = static_cast<int>(parse_int(key, value));
    else if (key == "buffer_capacity") cfg.buffer_capacity = static_cast<int>(parse_int(key, value));
    else if (key == "episodes_per_epoch") cfg.episodes_per_epoch = static_cast<int>(parse_int(key, value));
    else if (key == "train_steps_per_epoch") cfg.train_steps_per_epoch = static_cast<int>(parse_int(key, value));
    else if (key == "epoch_max") cfg.epoch_max = static_cast<int>(parse_int(key, value));
    else if (key == "env") cfg.env = parse_string(key, value);
    else if (key == "markov_lo") cfg.markov_lo = parse_real(key, value);
    else if (key == "markov_hi") cfg.markov_hi = parse_real(key, value);
    else if (key == "periodic_q") cfg.periodic_q = parse_real(key, value);
    else if (key == "correlated_flip") cfg.correlated_flip = parse_real(key, value);
    else if (key == "trace_path") cfg.trace_path = parse_string(key, value);
    else if (key == "env_a") cfg.env_a = parse_string(key, value);
    else if (key == "env_b") cfg.env_b = parse_string(key, value);
    else if (key == "switch_epoch") cfg.switch_epoch = static_cast<int>(parse_int(key, value));
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "algorithm") cfg.algorithm = parse_string(key, value);
    else if (key == "metrics_path") cfg.metrics_path = parse_string(key, value);
    else if (key == "checkpoint_path") cfg.checkpoint_path = parse_string(key, value);
    else if (key == "checkpoint_interval") cfg.checkpoint_interval = static_cast<int>(parse_int(key, value));
    else if (key == "eval_interval") cfg.eval_interval = static_cast<int>(parse_int(key, value));
    else if (key == "eval_episodes") cfg.eval_episodes = static_cast<int>(parse_int(key, value));
    else throw ConfigError("unknown config key '" + key + "'");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg = parse_config_text(buf.str());
  validate(cfg);
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.K < 1) throw ConfigError("K must be >= 1");
  if (cfg.N < 1) throw ConfigError("N must be >= 1");
  if (cfg.M < 1 || cfg.M > cfg.K) throw ConfigError("require 1 <= M <= K");
  if (cfg.T < 1) throw ConfigError("T must be >= 1");
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) throw ConfigError("gamma must be in [0, 1]");
  if (cfg.alpha <= 0.0) throw ConfigError("alpha must be positive");
  if (cfg.B < 1) throw ConfigError("B must be >= 1");
  if (cfg.epsilon_start < 0.0 || cfg.epsilon_start > 1.0 ||
      cfg.epsilon_end < 0.0 || cfg.epsilon_end > cfg.epsilon_start) {
    throw ConfigError("epsilon schedule must satisfy 0 <= end <= start <= 1");
  }
  if (cfg.epsilon_decay_steps < 1) throw ConfigError("epsilon_decay_steps must be >= 1");
  if (cfg.target_sync_interval < 1) throw ConfigError("target_sync_interval must be >= 1");
  if (cfg.td_lambda < 0.0 || cfg.td_lambda > 1.0) throw ConfigError("td_lambda must be in [0, 1]");
  if (cfg.bootstrap != "taken" && cfg.bootstrap != "greedy_online" &&
      cfg.bootstrap != "greedy_target" && cfg.bootstrap != "mixed") {
    throw ConfigError(
        "bootstrap must be taken, greedy_online, greedy_target or mixed");
  }
  if (cfg.head_init_scale <= 0.0) throw ConfigError("head_init_scale must be positive");
  if (cfg.warmup_episodes < 0) throw ConfigError("warmup_episodes must be >= 0");
  if (cfg.buffer_capacity < 1) throw ConfigError("buffer_capacity must be >= 1");
  if (cfg.episodes_per_epoch < 1) throw ConfigError("episodes_per_epoch must be >= 1");
  if (cfg.train_steps_per_epoch < 0) throw ConfigError("train_steps_per_epoch must be >= 0");
  if (cfg.epoch_max < 0) throw ConfigError("epoch_max must be >= 0");
  if (cfg.checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be >= 0");
  if (cfg.eval_interval < 0) throw ConfigError("eval_interval must be >= 0");
  if (cfg.eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");

  const std::set<std::string> envs{"markov", "periodic", "correlated", "trace",
                                   "switching"};
  if (!envs.count(cfg.env)) throw ConfigError("unknown env '" + cfg.env + "'");
  if (cfg.env == "switching") {
    if (!envs.count(cfg.env_a) || cfg.env_a == "switching" ||
        !envs.count(cfg.env_b) || cfg.env_b == "switching") {
      throw ConfigError("switching env requires env_a/env_b in {markov, periodic, correlated, trace}");
    }
    if (cfg.switch_epoch < 1) throw ConfigError("switch_epoch must be >= 1");
  }
  if ((cfg.env == "trace" ||
       (cfg.env == "switching" && (cfg.env_a == "trace" || cfg.env_b == "trace"))) &&
      cfg.trace_path.empty()) {
    throw ConfigError("trace env requires trace_path");
  }
  if (!(0.0 < cfg.markov_lo && cfg.markov_lo < cfg.markov_hi &&
        cfg.markov_hi < 1.0)) {
    throw ConfigError("require 0 < markov_lo < markov_hi < 1");
  }
  if (cfg.periodic_q < 0.0 || cfg.periodic_q > 1.0) {
    throw ConfigError("periodic_q must be in [0, 1]");
  }
  if (cfg.correlated_flip <= 0.0 || cfg.correlated_flip >= 1.0) {
    throw ConfigError("correlated_flip must be in (0, 1)");
  }
  if ((cfg.env == "periodic" ||
       (cfg.env == "switching" && (cfg.env_a == "periodic" || cfg.env_b == "periodic"))) &&
      cfg.K % 4 != 0) {
    throw ConfigError("periodic env requires K divisible by 4");
  }

  const std::set<std::string> algos{"qmix", "iql", "random"};
  if (!algos.count(cfg.algorithm)) {
    throw ConfigError("unknown algorithm '" + cfg.algorithm + "'");
  }
  if (cfg.metrics_path.empty()) throw ConfigError("metrics_path must be set");
  if (cfg.checkpoint_path.empty()) throw ConfigError("checkpoint_path must be set");
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "K = " << cfg.K << "\n";
  out << "N = " << cfg.N << "\n";
  out << "M = " << cfg.M << "\n";
  out << "T = " << cfg.T << "\n";
  out << "gamma = " << fmt_real(cfg.gamma) << "\n";
  out << "alpha = " << fmt_real(cfg.alpha) << "\n";
  out << "B = " << cfg.B << "\n";
  out << "epsilon_start = " << fmt_real(cfg.epsilon_start) << "\n";
  out << "epsilon_end = " << fmt_real(cfg.epsilon_end) << "\n";
  out << "epsilon_decay_steps = " << cfg.epsilon_decay_steps << "\n";
  out << "target_sync_interval = " << cfg.target_sync_interval << "\n";
  out << "td_lambda = " << fmt_real(cfg.td_lambda) << "\n";
  out << "bootstrap = \"" << cfg.bootstrap << "\"\n";
  out << "head_init_scale = " << fmt_real(cfg.head_init_scale) << "\n";
  out << "warmup_episodes = " << cfg.warmup_episodes << "\n";
  out << "buffer_capacity = " << cfg.buffer_capacity << "\n";
  out << "episodes_per_epoch = " << cfg.episodes_per_epoch << "\n";
  out << "train_steps_per_epoch = " << cfg.train_steps_per_epoch << "\n";
  out << "epoch_max = " << cfg.epoch_max << "\n";
  out << "env = \"" << cfg.env << "\"\n";
  out << "markov_lo = " << fmt_real(cfg.markov_lo) << "\n";
  out << "markov_hi = " << fmt_real(cfg.markov_hi) << "\n";
  out << "periodic_q = " << fmt_real(cfg.periodic_q) << "\n";
  out << "correlated_flip = " << fmt_real(cfg.correlated_flip) << "\n";
  out << "trace_path = \"" << cfg.trace_path << "\"\n";
  out << "env_a = \"" << cfg.env_a << "\"\n";
  out << "env_b = \"" << cfg.env_b << "\"\n";
  out << "switch_epoch = " << cfg.switch_epoch << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "algorithm = \"" << cfg.algorithm << "\"\n";
  out << "metrics_path = \"" << cfg.metrics_path << "\"\n";
  out << "checkpoint_path = \"" << cfg.checkpoint_path << "\"\n";
  out << "checkpoint_interval = " << cfg.checkpoint_interval << "\n";
  out << "eval_interval = " << cfg.eval_interval << "\n";
  out << "eval_episodes = " << cfg.eval_episodes << "\n";
  return out.str();
}

std::string resolve_output_path(const std::string& path) {
  const char* dir = std::getenv("QMIXDSA_OUTPUT_DIR");
  if (dir == nullptr || *dir == '\0') return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(dir) / p).string();
}

namespace {

std::unique_ptr<envsim::Environment> build_single_env(
    const ExperimentConfig& cfg, const std::string& kind,
    std::uint64_t structure_stream) {
  if (kind == "markov") {
    Rng gen = Rng::derive(cfg.seed, structure_stream);
    return std::make_unique<envsim::MarkovChannels>(
        envsim::init_markov(cfg.K, gen, cfg.markov_lo, cfg.markov_hi));
  }
  if (kind == "periodic") {
    return std::make_unique<envsim::PeriodicChannels>(cfg.K, cfg.periodic_q);
  }
  if (kind == "correlated") {
    Rng gen = Rng::derive(cfg.seed, structure_stream);
    return std::make_unique<envsim::CorrelatedChannels>(
        cfg.K, cfg.correlated_flip, gen);
  }
  if (kind == "trace") {
    return std::make_unique<envsim::TraceChannels>(
        envsim::load_trace(cfg.trace_path, cfg.K));
  }
  throw ConfigError("unknown env kind '" + kind + "'");
}

}  // namespace

std::unique_ptr<envsim::Environment> build_env(const ExperimentConfig& cfg) {
  if (cfg.env == "switching") {
    auto a = build_single_env(cfg, cfg.env_a, kStreamEnvGen);
    auto b = build_single_env(cfg, cfg.env_b, kStreamEnvGenB);
    return envsim::make_switching_env(std::move(a), std::move(b),
                                      cfg.switch_epoch);
  }
  return build_single_env(cfg, cfg.env, kStreamEnvGen);
}

}  // namespace qmixdsa::harness
