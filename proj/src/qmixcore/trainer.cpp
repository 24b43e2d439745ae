#include "qmixdsa/qmixcore/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "qmixdsa/error.hpp"

namespace qmixdsa::qmixcore {

using agentnet::ActionSpace;
using agentnet::AgentInput;
using agentnet::AgentNetParams;
using agentnet::encode_input;
using ndmath::ParamTensor;
using ndmath::Tape;

EpisodeRecord collect_episode(envsim::Environment& env,
                              std::span<const AgentNetParams* const> nets,
                              const ActionSpace& actions, int slots,
                              const agentnet::EpsilonSchedule* sched,
                              long* slot_counter, long eps_base,
                              RunStreams& streams, EpisodeStats* stats) {
  const int agents = static_cast<int>(nets.size());
  if (agents < 1) throw ConfigError("collect_episode: need at least one agent");
  if (sched != nullptr && slot_counter == nullptr) {
    throw UsageError("collect_episode: exploration requires a slot counter");
  }
  const int channels = env.channel_count();
  const int hidden_dim = nets[0]->hidden();
  const auto action_count = actions.count();

  EpisodeRecord ep = EpisodeRecord::empty(slots, channels, agents);
  std::vector<std::vector<double>> hidden(
      agents, std::vector<double>(hidden_dim, 0.0));
  std::vector<std::vector<double>> hidden_next(
      agents, std::vector<double>(hidden_dim, 0.0));
  std::vector<std::optional<std::uint64_t>> last_action(agents, std::nullopt);
  std::vector<double> q(action_count);
  std::vector<envsim::SenseSet> joint(agents);

  EpisodeStats st;
  for (int t = 0; t < slots; ++t) {
    const auto state = env.step(streams.env);
    std::copy(state.begin(), state.end(),
              reinterpret_cast<std::uint8_t*>(ep.mutable_state(t).data()));

    double eps = 0.0;
    if (sched != nullptr) {
      eps = sched->at(*slot_counter - eps_base);
    }
    if (t == 0) st.epsilon = eps;

    for (int n = 0; n < agents; ++n) {
      const AgentInput input = encode_input(ep.observation(t, n),
                                            last_action[n], n, action_count,
                                            agents);
      agentnet::agent_q_forward(*nets[n], input, hidden[n], hidden_next[n], q);
      hidden[n].swap(hidden_next[n]);
      const int a = agentnet::select_action(q, eps, streams.eps);
      ep.set_action(t, n, a);
      joint[n] = actions.unrank(static_cast<std::uint64_t>(a));
    }

    const auto outcome = envsim::resolve_slot(state, joint, streams.slot);
    for (int n = 0; n < agents; ++n) {
      ep.set_reward(t, n, outcome.rewards[n]);
      const auto obs = envsim::observe(state, joint[n]);
      auto row = ep.mutable_observation(t + 1, n);
      std::copy(obs.values.begin(), obs.values.end(), row.begin());
      last_action[n] = static_cast<std::uint64_t>(ep.action(t, n));

      switch (outcome.rewards[n]) {
        case envsim::kRewardSuccess: ++st.successes; break;
        case envsim::kRewardCollision: ++st.collisions; break;
        default: ++st.silent; break;
      }
    }
    st.total_reward += outcome.total_reward;
    st.oracle_bound += envsim::oracle_slot_bound(state, agents);

    if (sched != nullptr) *slot_counter += 1;
  }

  // Bootstrap state past the horizon.
  const auto final_state = env.step(streams.env);
  std::copy(final_state.begin(), final_state.end(),
            reinterpret_cast<std::uint8_t*>(ep.mutable_state(slots).data()));

  if (stats != nullptr) *stats = st;
  return ep;
}

namespace {

// Replays the target agent networks over an episode and returns per-slot
// per-agent full Q-vectors.
std::vector<std::vector<std::vector<double>>> replay_agent_q(
    const EpisodeRecord& ep, const AgentNetParams& net,
    const ActionSpace& actions) {
  const int agents = ep.agents;
  const int slots = ep.slots;
  const auto action_count = actions.count();
  const int hidden_dim = net.hidden();

  std::vector<std::vector<std::vector<double>>> q(
      slots, std::vector<std::vector<double>>(
                 agents, std::vector<double>(action_count)));
  std::vector<double> hidden(hidden_dim), hidden_next(hidden_dim);
  for (int n = 0; n < agents; ++n) {
    std::fill(hidden.begin(), hidden.end(), 0.0);
    std::optional<std::uint64_t> last;
    for (int t = 0; t < slots; ++t) {
      const AgentInput input =
          encode_input(ep.observation(t, n), last, n, action_count, agents);
      agentnet::agent_q_forward(net, input, hidden, hidden_next, q[t][n]);
      hidden.swap(hidden_next);
      last = static_cast<std::uint64_t>(ep.action(t, n));
    }
  }
  return q;
}

}  // namespace

std::vector<double> td_targets(const EpisodeRecord& ep,
                               const QmixParams& target,
                               const ActionSpace& actions, double gamma,
                               BootstrapRule rule, double lambda,
                               const QmixParams* online) {
  if ((rule == BootstrapRule::GreedyOnline || rule == BootstrapRule::Mixed) &&
      online == nullptr) {
    throw UsageError("td_targets: this bootstrap rule needs the online parameters");
  }
  if (lambda < 0.0 || lambda > 1.0) {
    throw UsageError("td_targets: lambda must be in [0, 1]");
  }
  const int slots = ep.slots;
  const int agents = ep.agents;
  const auto q = replay_agent_q(ep, target.agent, actions);
  const bool need_online =
      rule == BootstrapRule::GreedyOnline || rule == BootstrapRule::Mixed;
  const auto q_online =
      need_online ? replay_agent_q(ep, online->agent, actions)
                  : std::vector<std::vector<std::vector<double>>>{};

  std::vector<double> y(slots);
  std::vector<double> boot_q(agents);
  // Mixed target values for slots 1..T-1; slot T-1 is terminal.
  std::vector<double> mixed(slots, 0.0);
  std::vector<double> taken_q(agents);
  for (int t = 1; t < slots; ++t) {
    for (int n = 0; n < agents; ++n) {
      int a;
      switch (rule) {
        case BootstrapRule::TakenAction:
        case BootstrapRule::Mixed:
          a = ep.action(t, n);
          break;
        case BootstrapRule::GreedyOnline:
          a = agentnet::argmax_lowest(q_online[t][n]);
          break;
        case BootstrapRule::GreedyTarget:
        default:
          a = agentnet::argmax_lowest(q[t][n]);
          break;
      }
      boot_q[n] = q[t][n][static_cast<std::size_t>(a)];
      if (rule == BootstrapRule::Mixed) {
        taken_q[n] = boot_q[n];
      }
    }
    // Greedy bootstraps cannot exceed the feasible remaining return (rewards
    // are in {-1, 0, +2} per user per slot); clamping removes provably-wrong
    // overestimates that otherwise compound at gamma = 1.
    const double remaining = static_cast<double>(slots - t);
    const double lo = -static_cast<double>(agents) * remaining;
    const double hi = 2.0 * static_cast<double>(agents) * remaining;
    switch (rule) {
      case BootstrapRule::TakenAction:
        mixed[t] = mix(target.mixer, boot_q, ep.state(t));
        break;
      case BootstrapRule::Mixed: {
        for (int n = 0; n < agents; ++n) {
          boot_q[n] = q[t][n][static_cast<std::size_t>(
              agentnet::argmax_lowest(q_online[t][n]))];
        }
        const double greedy_part =
            std::clamp(mix(target.mixer, boot_q, ep.state(t)), lo, hi);
        const double taken_part = mix(target.mixer, taken_q, ep.state(t));
        mixed[t] = 0.5 * (greedy_part + taken_part);
        break;
      }
      default:
        mixed[t] = std::clamp(mix(target.mixer, boot_q, ep.state(t)), lo, hi);
        break;
    }
  }
  for (int t = slots - 1; t >= 0; --t) {
    const double r = ep.slot_total_reward(t);
    if (t + 1 < slots) {
      y[t] = r + gamma * ((1.0 - lambda) * mixed[t + 1] + lambda * y[t + 1]);
    } else {
      y[t] = r;
    }
  }
  return y;
}

double qmix_loss(std::span<const EpisodeRecord* const> batch,
                 QmixParams& theta, const QmixParams& target,
                 const ActionSpace& actions, double gamma, bool with_grad,
                 BootstrapRule rule, double lambda) {
  if (batch.empty()) throw UsageError("qmix_loss: empty batch");
  const int agents = batch[0]->agents;
  const int slots = batch[0]->slots;
  const auto action_count = actions.count();
  const int hidden_dim = theta.agent.hidden();
  const int embed = theta.mixer.embed();

  Tape tape;
  auto agent_ids = agentnet::AgentNetIds::bind(tape, theta.agent);
  auto mixer_ids = MixerIds::bind(tape, theta.mixer);

  std::vector<Tape::NodeId> errors;
  errors.reserve(batch.size() * static_cast<std::size_t>(slots));
  std::vector<Tape::NodeId> q_sel(agents);

  for (const EpisodeRecord* ep : batch) {
    if (ep->agents != agents || ep->slots != slots) {
      throw UsageError("qmix_loss: inconsistent episode shapes in batch");
    }
    const auto y = td_targets(*ep, target, actions, gamma, rule, lambda, &theta);

    std::vector<Tape::NodeId> hidden(agents, tape.zeros(hidden_dim));
    std::vector<std::optional<std::uint64_t>> last(agents, std::nullopt);
    for (int t = 0; t < slots; ++t) {
      for (int n = 0; n < agents; ++n) {
        const AgentInput input = encode_input(ep->observation(t, n), last[n],
                                              n, action_count, agents);
        hidden[n] = agentnet::agent_trunk_taped(tape, agent_ids, input,
                                                hidden[n]);
        q_sel[n] = agentnet::agent_q_at_taped(tape, agent_ids, hidden[n],
                                              ep->action(t, n));
        last[n] = static_cast<std::uint64_t>(ep->action(t, n));
      }
      auto qvec = tape.concat(q_sel);
      auto q_tot = mix_taped(tape, mixer_ids, qvec, ep->state(t), embed,
                             agents);
      errors.push_back(tape.sq_diff(q_tot, y[t]));
    }
  }
  const double scale =
      1.0 / (static_cast<double>(batch.size()) * static_cast<double>(slots));
  const auto loss = tape.sum_scaled(errors, scale);
  const double value = tape.value(loss)[0];
  if (with_grad) tape.backward(loss);
  return value;
}

// ---- QmixTrainer ----

QmixTrainer::QmixTrainer(TrainSettings settings, std::uint64_t weight_seed)
    : settings_(settings),
      actions_(settings.channels, settings.sense_size),
      weight_seed_(weight_seed),
      buffer_(settings.buffer_capacity) {
  Rng init(weight_seed_);
  theta_.agent = AgentNetParams::init(settings_.input_dim(actions_.count()),
                                      actions_.count(), init, 64, 64,
                                      settings_.head_init_scale);
  theta_.mixer = MixerParams::init(settings_.channels, settings_.agents, init);
  target_ = theta_;
  rebuild_param_ptrs();
  adam_.clear();
  for (ParamTensor* p : param_ptrs_) adam_.push_back(ndmath::AdamState::for_tensor(*p));
}

void QmixTrainer::rebuild_param_ptrs() {
  param_ptrs_.clear();
  theta_.for_each([&](const char*, ParamTensor& t) { param_ptrs_.push_back(&t); });
}

EpisodeStats QmixTrainer::collect_and_store(envsim::Environment& env,
                                            RunStreams& streams) {
  std::vector<const AgentNetParams*> nets(settings_.agents, &theta_.agent);
  EpisodeStats stats;
  EpisodeRecord ep = collect_episode(env, nets, actions_, settings_.slots,
                                          &settings_.eps, &slot_counter_,
                                          eps_base_, streams, &stats);
  buffer_.store(std::move(ep));
  return stats;
}

EpisodeStats QmixTrainer::evaluate_episode(envsim::Environment& env,
                                           RunStreams& streams) {
  std::vector<const AgentNetParams*> nets(settings_.agents, &theta_.agent);
  EpisodeStats stats;
  (void)collect_episode(env, nets, actions_, settings_.slots, nullptr,
                             nullptr, 0, streams, &stats);
  return stats;
}

double QmixTrainer::train_step(RunStreams& streams) {
  const auto batch =
      buffer_.sample(static_cast<std::size_t>(settings_.batch_size),
                     streams.batch);
  for (ParamTensor* p : param_ptrs_) p->zero_grad();
  const double loss =
      qmix_loss(batch, theta_, target_, actions_, settings_.gamma, true,
                settings_.bootstrap, settings_.td_lambda);
  ndmath::clip_global_grad_norm(param_ptrs_, settings_.grad_clip);
  ndmath::adam_step(param_ptrs_, adam_, settings_.lr);
  ++train_steps_;
  if (train_steps_ % settings_.target_sync_interval == 0) sync_target();
  return loss;
}

void QmixTrainer::sync_target() { target_ = theta_; }

EpochResult QmixTrainer::train_epoch(envsim::Environment& env,
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

void QmixTrainer::reset() {
  Rng init(weight_seed_);
  theta_.agent = AgentNetParams::init(settings_.input_dim(actions_.count()),
                                      actions_.count(), init, 64, 64,
                                      settings_.head_init_scale);
  theta_.mixer = MixerParams::init(settings_.channels, settings_.agents, init);
  target_ = theta_;
  rebuild_param_ptrs();
  adam_.clear();
  for (ParamTensor* p : param_ptrs_) adam_.push_back(ndmath::AdamState::for_tensor(*p));
  buffer_.clear();
  train_steps_ = 0;
  eps_base_ = slot_counter_;
}

}  // namespace qmixdsa::qmixcore
