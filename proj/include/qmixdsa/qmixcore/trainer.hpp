#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qmixdsa/agentnet/actions.hpp"
#include "qmixdsa/agentnet/drqn.hpp"
#include "qmixdsa/envsim/channels.hpp"
#include "qmixdsa/envsim/slot.hpp"
#include "qmixdsa/ndmath/adam.hpp"
#include "qmixdsa/qmixcore/mixer.hpp"
#include "qmixdsa/qmixcore/replay.hpp"

namespace qmixdsa::qmixcore {

// How the bootstrap value Q_{t+1} is read from the target network.
//   TakenAction: value of the recorded next action (trajectory replay).
//   GreedyOnline: online networks choose, target networks value (double
//     estimation).
//   GreedyTarget: target networks' own greedy value.
//   Mixed: average of the TakenAction value and the (feasibility-clamped)
//     GreedyOnline value.
// The pure greedy readings accumulate max-bias that grows with the
// action-space size; at gamma = 1 with C(16,4) actions they diverge, so
// TakenAction is the default.
enum class BootstrapRule { TakenAction, GreedyOnline, GreedyTarget, Mixed };

struct TrainSettings {
  int channels = 16;
  int agents = 3;
  int sense_size = 2;
  int slots = 20;
  double gamma = 1.0;
  double lr = 5e-4;
  double grad_clip = 10.0;
  int batch_size = 16;
  int target_sync_interval = 40;
  std::size_t buffer_capacity = 600;
  agentnet::EpsilonSchedule eps;
  BootstrapRule bootstrap = BootstrapRule::TakenAction;
  // Lambda-return mixing: y_t blends the one-step bootstrap with the
  // recursive remaining return. 0 = pure one-step, 1 = episode return.
  double td_lambda = 0.0;
  // Scale multiplier on the Q-head initialization; a small head starts the
  // value estimates near zero so early targets are dominated by rewards.
  double head_init_scale = 1.0;
  // Gradient steps are skipped until the buffer holds this many episodes
  // (at least batch_size).
  int warmup_episodes = 0;

  int input_dim(std::uint64_t action_count) const {
    return 3 * channels + static_cast<int>(action_count) + agents;
  }
};

// The independent randomness streams of one run. Owned and checkpointed by
// the harness; trainers only draw from them.
struct RunStreams {
  Rng env;    // channel initialization and slot transitions
  Rng slot;   // transmit-channel tie breaks
  Rng eps;    // exploration draws
  Rng batch;  // replay sampling
};

// Per-episode aggregates; one metrics row per episode.
struct EpisodeStats {
  int successes = 0;
  int collisions = 0;  // collided transmissions (user-slots)
  int silent = 0;      // silent user-slots
  int total_reward = 0;
  int oracle_bound = 0;
  double epsilon = 0.0;  // value used at the episode's first slot
};

// Rolls one episode: agents act epsilon-greedily on their own observation
// histories; the environment advances one extra slot for the bootstrap
// state. nets holds one entry per agent (shared parameters point at the
// same object). When sched is null the rollout is greedy and the slot
// counter is left untouched.
EpisodeRecord collect_episode(envsim::Environment& env,
                              std::span<const agentnet::AgentNetParams* const> nets,
                              const agentnet::ActionSpace& actions, int slots,
                              const agentnet::EpsilonSchedule* sched,
                              long* slot_counter, long eps_base,
                              RunStreams& streams, EpisodeStats* stats);

// Shared parameters for the whole QMIX learner.
struct QmixParams {
  agentnet::AgentNetParams agent;
  MixerParams mixer;

  template <class F>
  void for_each(F&& f) {
    agent.for_each([&](const char* name, ndmath::ParamTensor& t) {
      const std::string full = std::string("agent.") + name;
      f(full.c_str(), t);
    });
    mixer.for_each([&](const char* name, ndmath::ParamTensor& t) {
      const std::string full = std::string("mixer.") + name;
      f(full.c_str(), t);
    });
  }
};

// Per-slot regression targets for one episode under the target parameters.
// One-step form (lambda = 0, and always for the greedy rules):
//   y_t = r_t^tot + gamma * Q_tot(tau_{t+1}, a_{t+1}, s_{t+1})
// for t < T-1 and y_{T-1} = r_{T-1}^tot (no bootstrap past the horizon),
// where a_{t+1} is chosen by the bootstrap rule. With lambda > 0 the
// recursion blends in the sampled remaining return:
//   y_t = r_t + gamma * ((1-lambda) * Q_tot(tau_{t+1}, a_{t+1}, s_{t+1})
//                        + lambda * y_{t+1}).
// GreedyOnline requires online.
std::vector<double> td_targets(const EpisodeRecord& episode,
                               const QmixParams& target,
                               const agentnet::ActionSpace& actions,
                               double gamma,
                               BootstrapRule rule = BootstrapRule::TakenAction,
                               double lambda = 0.0,
                               const QmixParams* online = nullptr);

// Mean squared TD error over the batch; with_grad accumulates parameter
// gradients through the full unrolled episodes.
double qmix_loss(std::span<const EpisodeRecord* const> batch,
                 QmixParams& theta, const QmixParams& target,
                 const agentnet::ActionSpace& actions, double gamma,
                 bool with_grad,
                 BootstrapRule rule = BootstrapRule::TakenAction,
                 double lambda = 0.0);

struct EpochResult {
  std::vector<EpisodeStats> episodes;
  std::vector<double> losses;
  double mean_loss = 0.0;
  int train_steps_run = 0;
};

class QmixTrainer {
 public:
  QmixTrainer(TrainSettings settings, std::uint64_t weight_seed);

  const TrainSettings& settings() const { return settings_; }
  const agentnet::ActionSpace& action_space() const { return actions_; }

  QmixParams& params() { return theta_; }
  const QmixParams& params() const { return theta_; }
  const QmixParams& target() const { return target_; }
  QmixParams& mutable_target() { return target_; }

  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  long train_steps() const { return train_steps_; }
  void set_train_steps(long steps) { train_steps_ = steps; }
  long slot_counter() const { return slot_counter_; }
  void set_slot_counter(long v) { slot_counter_ = v; }
  long eps_base() const { return eps_base_; }
  void set_eps_base(long v) { eps_base_ = v; }
  double current_epsilon() const {
    return settings_.eps.at(slot_counter_ - eps_base_);
  }

  // Collects one training episode into the buffer; returns its stats.
  EpisodeStats collect_and_store(envsim::Environment& env, RunStreams& streams);

  // One greedy episode without storing or advancing exploration.
  EpisodeStats evaluate_episode(envsim::Environment& env, RunStreams& streams);

  // One gradient step on a sampled batch; returns the loss.
  double train_step(RunStreams& streams);

  void sync_target();

  // Collect-then-train epoch; gradient steps are skipped while the buffer
  // holds fewer than batch_size episodes.
  EpochResult train_epoch(envsim::Environment& env, RunStreams& streams,
                          int episodes_per_epoch, int train_steps_per_epoch);

  // Re-initializes parameters, optimizer, buffer and exploration to the
  // run's original initial state (the weight stream is replayed).
  void reset();

  template <class F>
  void for_each_param(F&& f) {
    theta_.for_each(f);
  }
  template <class F>
  void for_each_target_param(F&& f) {
    target_.for_each(f);
  }
  std::span<ndmath::AdamState> adam_states() { return adam_; }
  std::span<ndmath::ParamTensor* const> param_ptrs() const {
    return param_ptrs_;
  }

 private:
  void rebuild_param_ptrs();

  TrainSettings settings_;
  agentnet::ActionSpace actions_;
  std::uint64_t weight_seed_;
  QmixParams theta_;
  QmixParams target_;
  std::vector<ndmath::ParamTensor*> param_ptrs_;
  std::vector<ndmath::AdamState> adam_;
  ReplayBuffer buffer_;
  long train_steps_ = 0;
  long slot_counter_ = 0;
  long eps_base_ = 0;
};

}  // namespace qmixdsa::qmixcore
