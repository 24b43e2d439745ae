#pragma once

#include <cstdint>
#include <vector>

#include "qmixdsa/agentnet/actions.hpp"
#include "qmixdsa/envsim/channels.hpp"
#include "qmixdsa/qmixcore/trainer.hpp"

namespace qmixdsa::baselines {

// Uniform-random sensing baseline: every agent draws a uniform action each
// slot; slot resolution is identical to the learned policies'.
qmixcore::EpisodeStats random_policy_episode(envsim::Environment& env,
                                             const agentnet::ActionSpace& actions,
                                             int agents, int slots,
                                             qmixcore::RunStreams& streams);

// Independent Q-learners: one DRQN per agent trained on its own reward with
// per-agent greedy bootstrapping. No mixing network and no shared reward;
// replay, target-network and exploration machinery match the QMIX trainer.
class IqlTrainer {
 public:
  IqlTrainer(qmixcore::TrainSettings settings, std::uint64_t weight_seed);

  const qmixcore::TrainSettings& settings() const { return settings_; }
  const agentnet::ActionSpace& action_space() const { return actions_; }

  std::vector<agentnet::AgentNetParams>& agents() { return theta_; }
  const std::vector<agentnet::AgentNetParams>& agents() const { return theta_; }

  qmixcore::ReplayBuffer& buffer() { return buffer_; }
  const qmixcore::ReplayBuffer& buffer() const { return buffer_; }

  long train_steps() const { return train_steps_; }
  void set_train_steps(long v) { train_steps_ = v; }
  long slot_counter() const { return slot_counter_; }
  void set_slot_counter(long v) { slot_counter_ = v; }
  long eps_base() const { return eps_base_; }
  void set_eps_base(long v) { eps_base_ = v; }
  double current_epsilon() const {
    return settings_.eps.at(slot_counter_ - eps_base_);
  }

  qmixcore::EpisodeStats collect_and_store(envsim::Environment& env,
                                           qmixcore::RunStreams& streams);
  qmixcore::EpisodeStats evaluate_episode(envsim::Environment& env,
                                          qmixcore::RunStreams& streams);
  double train_step(qmixcore::RunStreams& streams);
  void sync_target();
  qmixcore::EpochResult train_epoch(envsim::Environment& env,
                                    qmixcore::RunStreams& streams,
                                    int episodes_per_epoch,
                                    int train_steps_per_epoch);
  void reset();

  // Per-slot per-agent targets under the target networks.
  std::vector<std::vector<double>> td_targets(
      const qmixcore::EpisodeRecord& episode) const;

  double loss(std::span<const qmixcore::EpisodeRecord* const> batch,
              bool with_grad);

  template <class F>
  void for_each_param(F&& f) {
    for (std::size_t n = 0; n < theta_.size(); ++n) {
      theta_[n].for_each([&](const char* name, ndmath::ParamTensor& t) {
        const std::string full =
            "agent" + std::to_string(n) + "." + name;
        f(full.c_str(), t);
      });
    }
  }
  template <class F>
  void for_each_target_param(F&& f) {
    for (std::size_t n = 0; n < target_.size(); ++n) {
      target_[n].for_each([&](const char* name, ndmath::ParamTensor& t) {
        const std::string full =
            "agent" + std::to_string(n) + "." + name;
        f(full.c_str(), t);
      });
    }
  }
  std::span<ndmath::AdamState> adam_states() { return adam_; }
  std::span<ndmath::ParamTensor* const> param_ptrs() const {
    return param_ptrs_;
  }

 private:
  void init_params();
  void rebuild_param_ptrs();

  qmixcore::TrainSettings settings_;
  agentnet::ActionSpace actions_;
  std::uint64_t weight_seed_;
  std::vector<agentnet::AgentNetParams> theta_;
  std::vector<agentnet::AgentNetParams> target_;
  std::vector<ndmath::ParamTensor*> param_ptrs_;
  std::vector<ndmath::AdamState> adam_;
  qmixcore::ReplayBuffer buffer_;
  long train_steps_ = 0;
  long slot_counter_ = 0;
  long eps_base_ = 0;
};

}  // namespace qmixdsa::baselines
