#pragma once

#include <cstdint>
#include <string>

#include "qmixdsa/agentnet/drqn.hpp"
#include "qmixdsa/envsim/channels.hpp"
#include "qmixdsa/qmixcore/trainer.hpp"

namespace qmixdsa::harness {

// Fixed derivation ids for every randomness stream of a run; combined with
// the config seed they pin the experiment end to end.
enum StreamId : std::uint64_t {
  kStreamWeights = 0,
  kStreamEnv = 1,       // channel initialization and transitions
  kStreamSlot = 2,      // transmit tie-breaks
  kStreamEpsilon = 3,   // exploration draws
  kStreamBatch = 4,     // replay sampling
  kStreamEnvGen = 5,    // generated environment structure (first process)
  kStreamEnvGenB = 6,   // generated structure of the second process
  kStreamEvalBase = 100,  // evaluation blocks add the epoch index
};

struct ExperimentConfig {
  int K = 16;  // channels
  int N = 3;   // cognitive users
  int M = 2;   // sensed channels per slot
  int T = 20;  // slots per episode
  double gamma = 1.0;
  double alpha = 5e-4;  // learning rate
  int B = 16;           // batch size (episodes)
  double epsilon_start = 0.4;
  double epsilon_end = 0.05;
  long epsilon_decay_steps = 10000;
  int target_sync_interval = 40;
  double td_lambda = 0.0;  // lambda-return mixing in the TD targets
  std::string bootstrap = "taken";  // taken|greedy_online|greedy_target
  double head_init_scale = 1.0;
  int warmup_episodes = 0;  // extra buffer floor before training starts
  int buffer_capacity = 600;
  int episodes_per_epoch = 20;
  int train_steps_per_epoch = 24;
  int epoch_max = 300;

  std::string env = "markov";  // markov|periodic|correlated|trace|switching
  double markov_lo = 0.05;
  double markov_hi = 0.95;
  double periodic_q = 0.75;
  double correlated_flip = 0.3;
  std::string trace_path;
  std::string env_a = "periodic";  // switching: process before the switch
  std::string env_b = "correlated";
  int switch_epoch = 150;

  std::uint64_t seed = 1;
  std::string algorithm = "qmix";  // qmix|iql|random

  std::string metrics_path = "metrics.csv";
  std::string checkpoint_path = "checkpoint.qmix";
  int checkpoint_interval = 0;  // epochs between checkpoints; 0 = final only
  int eval_interval = 10;       // epochs between greedy eval blocks; 0 = off
  int eval_episodes = 20;

  qmixcore::TrainSettings train_settings() const;
  agentnet::EpsilonSchedule epsilon_schedule() const;
};

// Flat `key = value` text (TOML-compatible subset): '#' comments, quoted
// strings, integers, reals, and the keys named exactly as the fields above.
// Unknown or duplicate keys are configuration errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Full validation; throws ConfigError. Called before any side effects.
void validate(const ExperimentConfig& cfg);

// Canonical serialization (fixed key order, lossless doubles). Parsing the
// result reproduces the config exactly.
std::string serialize_config(const ExperimentConfig& cfg);

// Resolves a relative output path against QMIXDSA_OUTPUT_DIR when that
// variable is set; absolute paths and unset variable pass through.
std::string resolve_output_path(const std::string& path);

// Builds the configured channel process. Structure randomness derives from
// the config seed (kStreamEnvGen / kStreamEnvGenB).
std::unique_ptr<envsim::Environment> build_env(const ExperimentConfig& cfg);

}  // namespace qmixdsa::harness
