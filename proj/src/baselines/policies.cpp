#include "qmixdsa/baselines/policies.hpp"

#include <algorithm>
#include <cmath>

#include "qmixdsa/error.hpp"

namespace qmixdsa::baselines {

using agentnet::ActionSpace;
using agentnet::AgentInput;
using agentnet::AgentNetParams;
using ndmath::ParamTensor;
using ndmath::Tape;
using qmixcore::EpisodeRecord;
using qmixcore::EpisodeStats;
using qmixcore::EpochResult;
using qmixcore::RunStreams;

EpisodeStats random_policy_episode(envsim::Environment& env,
                                   const ActionSpace& actions, int agents,
                                   int slots, RunStreams& streams) {
  EpisodeStats st;
  st.epsilon = 1.0;
  std::vector<envsim::SenseSet> joint(agents);
  for (int t = 0; t < slots; ++t) {
    const auto state = env.step(streams.env);
    for (int n = 0; n < agents; ++n) {
      const auto a = static_cast<std::uint64_t>(
          streams.eps.uniform_int(static_cast<int>(actions.count())));
      joint[n] = actions.unrank(a);
    }
    const auto outcome = envsim::resolve_slot(state, joint, streams.slot);
    for (int n = 0; n < agents; ++n) {
      switch (outcome.rewards[n]) {
        case envsim::kRewardSuccess: ++st.successes; break;
        case envsim::kRewardCollision: ++st.collisions; break;
        default: ++st.silent; break;
      }
    }
    st.total_reward += outcome.total_reward;
    st.oracle_bound += envsim::oracle_slot_bound(state, agents);
  }
  // Keep slot accounting aligned with the learned policies, which consume
  // one extra state for the bootstrap row.
  (void)env.step(streams.env);
  return st;
}

IqlTrainer::IqlTrainer(qmixcore::TrainSettings settings,
                       std::uint64_t weight_seed)
    : settings_(settings),
      actions_(settings.channels, settings.sense_size),
      weight_seed_(weight_seed),
      buffer_(settings.buffer_capacity) {
  init_params();
}

void IqlTrainer::init_params() {
  Rng init(weight_seed_);
  theta_.clear();
  for (int n = 0; n < settings_.agents; ++n) {
    theta_.push_back(AgentNetParams::init(
        settings_.input_dim(actions_.count()), actions_.count(), init, 64, 64,
        settings_.head_init_scale));
  }
  target_ = theta_;
  rebuild_param_ptrs();
  adam_.clear();
  for (ParamTensor* p : param_ptrs_) {
    adam_.push_back(ndmath::AdamState::for_tensor(*p));
  }
}

void IqlTrainer::rebuild_param_ptrs() {
  param_ptrs_.clear();
  for (auto& net : theta_) {
    net.for_each([&](const char*, ParamTensor& t) { param_ptrs_.push_back(&t); });
  }
}

EpisodeStats IqlTrainer::collect_and_store(envsim::Environment& env,
                                           RunStreams& streams) {
  std::vector<const AgentNetParams*> nets;
  nets.reserve(theta_.size());
  for (const auto& net : theta_) nets.push_back(&net);
  EpisodeStats stats;
  EpisodeRecord ep = qmixcore::collect_episode(
      env, nets, actions_, settings_.slots, &settings_.eps, &slot_counter_,
      eps_base_, streams, &stats);
  buffer_.store(std::move(ep));
  return stats;
}

EpisodeStats IqlTrainer::evaluate_episode(envsim::Environment& env,
                                          RunStreams& streams) {
  std::vector<const AgentNetParams*> nets;
  nets.reserve(theta_.size());
  for (const auto& net : theta_) nets.push_back(&net);
  EpisodeStats stats;
  (void)qmixcore::collect_episode(env, nets, actions_, settings_.slots,
                                  nullptr, nullptr, 0, streams, &stats);
  return stats;
}

std::vector<std::vector<double>> IqlTrainer::td_targets(
    const EpisodeRecord& ep) const {
  const int slots = ep.slots;
  const int agents = ep.agents;
  std::vector<std::vector<double>> y(
      slots, std::vector<double>(agents, 0.0));

  // Same bootstrap rule as the QMIX trainer, applied per agent on its own
  // reward stream.
  std::vector<double> q(actions_.count()), q_online(actions_.count());
  const bool need_online =
      settings_.bootstrap == qmixcore::BootstrapRule::GreedyOnline ||
      settings_.bootstrap == qmixcore::BootstrapRule::Mixed;
  for (int n = 0; n < agents; ++n) {
    const auto& net = target_[static_cast<std::size_t>(n)];
    const auto& online = theta_[static_cast<std::size_t>(n)];
    std::vector<double> hidden(net.hidden(), 0.0), hidden_next(net.hidden());
    std::vector<double> hidden_on(net.hidden(), 0.0), hidden_on_next(net.hidden());
    std::optional<std::uint64_t> last;
    std::vector<double> boot(slots, 0.0);
    for (int t = 0; t < slots; ++t) {
      const AgentInput input = agentnet::encode_input(
          ep.observation(t, n), last, n, actions_.count(), agents);
      agentnet::agent_q_forward(net, input, hidden, hidden_next, q);
      if (need_online) {
        agentnet::agent_q_forward(online, input, hidden_on, hidden_on_next,
                                  q_online);
        hidden_on.swap(hidden_on_next);
      }
      hidden.swap(hidden_next);
      last = static_cast<std::uint64_t>(ep.action(t, n));
      const double remaining = static_cast<double>(slots - t);
      const double lo = -remaining, hi = 2.0 * remaining;
      switch (settings_.bootstrap) {
        case qmixcore::BootstrapRule::TakenAction:
          boot[t] = q[static_cast<std::size_t>(ep.action(t, n))];
          break;
        case qmixcore::BootstrapRule::GreedyOnline:
          boot[t] = std::clamp(
              q[static_cast<std::size_t>(agentnet::argmax_lowest(q_online))],
              lo, hi);
          break;
        case qmixcore::BootstrapRule::Mixed:
          boot[t] = 0.5 * (q[static_cast<std::size_t>(ep.action(t, n))] +
                           std::clamp(q[static_cast<std::size_t>(
                                          agentnet::argmax_lowest(q_online))],
                                      lo, hi));
          break;
        case qmixcore::BootstrapRule::GreedyTarget:
        default:
          boot[t] = std::clamp(
              q[static_cast<std::size_t>(agentnet::argmax_lowest(q))], lo, hi);
          break;
      }
    }
    const double lambda = settings_.td_lambda;
    for (int t = slots - 1; t >= 0; --t) {
      const double r = ep.reward(t, n);
      if (t + 1 < slots) {
        y[t][n] = r + settings_.gamma *
                          ((1.0 - lambda) * boot[t + 1] + lambda * y[t + 1][n]);
      } else {
        y[t][n] = r;
      }
    }
  }
  return y;
}

double IqlTrainer::loss(std::span<const EpisodeRecord* const> batch,
                        bool with_grad) {
  if (batch.empty()) throw UsageError("iql loss: empty batch");
  const int agents = settings_.agents;
  const int slots = settings_.slots;
  const auto action_count = actions_.count();
  const int hidden_dim = theta_[0].hidden();

  Tape tape;
  std::vector<agentnet::AgentNetIds> ids;
  ids.reserve(theta_.size());
  for (auto& net : theta_) ids.push_back(agentnet::AgentNetIds::bind(tape, net));

  std::vector<Tape::NodeId> errors;
  errors.reserve(batch.size() * static_cast<std::size_t>(slots * agents));
  for (const EpisodeRecord* ep : batch) {
    const auto y = td_targets(*ep);
    for (int n = 0; n < agents; ++n) {
      Tape::NodeId hidden = tape.zeros(hidden_dim);
      std::optional<std::uint64_t> last;
      for (int t = 0; t < slots; ++t) {
        const AgentInput input = agentnet::encode_input(
            ep->observation(t, n), last, n, action_count, agents);
        hidden = agentnet::agent_trunk_taped(tape, ids[n], input, hidden);
        auto q_sel = agentnet::agent_q_at_taped(tape, ids[n], hidden,
                                                ep->action(t, n));
        errors.push_back(tape.sq_diff(q_sel, y[t][n]));
        last = static_cast<std::uint64_t>(ep->action(t, n));
      }
    }
  }
  const double scale = 1.0 / (static_cast<double>(batch.size()) *
                              static_cast<double>(slots) *
                              static_cast<double>(agents));
  const auto loss_node = tape.sum_scaled(errors, scale);
  const double value = tape.value(loss_node)[0];
  if (with_grad) tape.backward(loss_node);
  return value;
}

double IqlTrainer::train_step(RunStreams& streams) {
  const auto batch = buffer_.sample(
      static_cast<std::size_t>(settings_.batch_size), streams.batch);
  for (ParamTensor* p : param_ptrs_) p->zero_grad();
  const double value = loss(batch, true);
  ndmath::clip_global_grad_norm(param_ptrs_, settings_.grad_clip);
  ndmath::adam_step(param_ptrs_, adam_, settings_.lr);
  ++train_steps_;
  if (train_steps_ % settings_.target_sync_interval == 0) sync_target();
  return value;
}

void IqlTrainer::sync_target() { target_ = theta_; }

EpochResult IqlTrainer::train_epoch(envsim::Environment& env,
                                    RunStreams& streams,
                                    int episodes_per_epoch,
                                    int train_steps_per_epoch) {
  EpochResult result;
  for (int e = 0; e < episodes_per_epoch; ++e) {
    result.episodes.push_back(collect_and_store(env, streams));
  }
  const std::size_t warm = std::max<std::size_t>(
      static_cast<std::size_t>(settings_.batch_size),
      static_cast<std::size_t>(settings_.warmup_episodes));
  if (buffer_.size() >= warm) {
    for (int s = 0; s < train_steps_per_epoch; ++s) {
      result.losses.push_back(train_step(streams));
    }
  }
  result.train_steps_run = static_cast<int>(result.losses.size());
  if (!result.losses.empty()) {
    double sum = 0.0;
    for (double l : result.losses) sum += l;
    result.mean_loss = sum / static_cast<double>(result.losses.size());
  }
  return result;
}

void IqlTrainer::reset() {
  init_params();
  buffer_.clear();
  train_steps_ = 0;
  eps_base_ = slot_counter_;
}

}  // namespace qmixdsa::baselines
