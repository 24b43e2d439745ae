#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qmixdsa/baselines/policies.hpp"
#include "qmixdsa/harness/checkpoint.hpp"
#include "qmixdsa/harness/config.hpp"
#include "qmixdsa/harness/metrics.hpp"

namespace qmixdsa::harness {

// Fires when the 20-episode moving average of the success rate drops below
// 0.6x its running maximum. Armed only once exploration has reached its
// floor (the execution phase); a reset disarms it again.
class DegradationDetector {
 public:
  static constexpr int kWindow = 20;
  static constexpr double kThreshold = 0.6;

  void arm() { armed_ = true; }
  bool armed() const { return armed_; }

  // Feeds one episode's success rate; true means degradation detected.
  bool update(double success_rate);

  void reset();

  std::vector<double> serialize() const;
  void restore(std::span<const double> data);

 private:
  std::vector<double> window_;  // trailing rates, oldest first
  double running_max_ = 0.0;
  bool armed_ = false;
};

struct EvalSummary {
  int episodes = 0;
  double mean_success_rate = 0.0;
  double mean_oracle_fraction = 0.0;  // mean of bound/(N*T)
  double mean_successes = 0.0;
  double mean_collisions = 0.0;
  double mean_reward = 0.0;
  // Total successes / total oracle bound across the evaluated episodes.
  double success_vs_oracle = 0.0;
};

struct RunSummary {
  int epochs_run = 0;
  long episodes_logged = 0;
  std::vector<long> reset_episodes;  // global episode index at each reset
  std::optional<EvalSummary> last_eval;
  std::string metrics_path;
  std::string checkpoint_path;
};

// Executes epoch_max epochs of the configured algorithm, appending one
// metrics row per collected episode (plus flagged eval rows) and writing
// checkpoints at the configured cadence and at exit.
RunSummary run_experiment(const ExperimentConfig& cfg);

// Continues a checkpointed run up to epoch_max (or the override). The
// subsequent metrics stream is identical to an uninterrupted run.
RunSummary resume_experiment(const std::string& checkpoint_path,
                             const std::string& metrics_override = "",
                             int epoch_max_override = -1);

// Greedy rollouts of a stored policy on a freshly initialized environment.
// env_override, when given, must agree with the checkpoint on K, N and M.
EvalSummary evaluate(const Checkpoint& ckpt, int episodes,
                     std::uint64_t eval_seed,
                     const std::optional<ExperimentConfig>& env_override =
                         std::nullopt,
                     const std::string& csv_out = "");
EvalSummary evaluate(const std::string& checkpoint_path, int episodes,
                     std::uint64_t eval_seed,
                     const std::optional<ExperimentConfig>& env_override =
                         std::nullopt,
                     const std::string& csv_out = "");

}  // namespace qmixdsa::harness
