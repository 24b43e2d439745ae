#include "qmixdsa/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "qmixdsa/error.hpp"

namespace qmixdsa::harness {

using baselines::IqlTrainer;
using ndmath::ParamTensor;
using qmixcore::EpisodeStats;
using qmixcore::QmixTrainer;
using qmixcore::RunStreams;

bool DegradationDetector::update(double success_rate) {
  window_.push_back(success_rate);
  if (static_cast<int>(window_.size()) > kWindow) {
    window_.erase(window_.begin());
  }
  if (static_cast<int>(window_.size()) < kWindow) return false;
  double avg = 0.0;
  for (double v : window_) avg += v;
  avg /= static_cast<double>(window_.size());
  if (!armed_) return false;
  running_max_ = std::max(running_max_, avg);
  return avg < kThreshold * running_max_;
}

void DegradationDetector::reset() {
  window_.clear();
  running_max_ = 0.0;
  armed_ = false;
}

std::vector<double> DegradationDetector::serialize() const {
  std::vector<double> out;
  out.push_back(armed_ ? 1.0 : 0.0);
  out.push_back(running_max_);
  out.push_back(static_cast<double>(window_.size()));
  out.insert(out.end(), window_.begin(), window_.end());
  return out;
}

void DegradationDetector::restore(std::span<const double> data) {
  if (data.size() < 3) throw DataError("detector state too short");
  armed_ = data[0] != 0.0;
  running_max_ = data[1];
  const auto count = static_cast<std::size_t>(data[2]);
  if (data.size() != 3 + count) throw DataError("detector state size mismatch");
  window_.assign(data.begin() + 3, data.end());
}

namespace {

RunStreams fresh_streams(std::uint64_t seed) {
  return RunStreams{Rng::derive(seed, kStreamEnv), Rng::derive(seed, kStreamSlot),
                    Rng::derive(seed, kStreamEpsilon),
                    Rng::derive(seed, kStreamBatch)};
}

RunStreams eval_streams(std::uint64_t eval_master) {
  return RunStreams{Rng::derive(eval_master, 1), Rng::derive(eval_master, 2),
                    Rng::derive(eval_master, 3), Rng::derive(eval_master, 4)};
}

// Binds one of the three algorithms behind a uniform surface.
class Algo {
 public:
  Algo(const ExperimentConfig& cfg)
      : cfg_(cfg), actions_(cfg.K, cfg.M) {
    const std::uint64_t weight_seed =
        Rng::derive(cfg.seed, kStreamWeights).next_u64();
    if (cfg.algorithm == "qmix") {
      qmix_ = std::make_unique<QmixTrainer>(cfg.train_settings(), weight_seed);
    } else if (cfg.algorithm == "iql") {
      iql_ = std::make_unique<IqlTrainer>(cfg.train_settings(), weight_seed);
    }
  }

  bool learns() const { return qmix_ != nullptr || iql_ != nullptr; }

  EpisodeStats collect(envsim::Environment& env, RunStreams& streams) {
    if (qmix_) return qmix_->collect_and_store(env, streams);
    if (iql_) return iql_->collect_and_store(env, streams);
    return baselines::random_policy_episode(env, actions_, cfg_.N, cfg_.T,
                                            streams);
  }

  EpisodeStats evaluate(envsim::Environment& env, RunStreams& streams) {
    if (qmix_) return qmix_->evaluate_episode(env, streams);
    if (iql_) return iql_->evaluate_episode(env, streams);
    return baselines::random_policy_episode(env, actions_, cfg_.N, cfg_.T,
                                            streams);
  }

  std::size_t buffer_size() const {
    if (qmix_) return qmix_->buffer().size();
    if (iql_) return iql_->buffer().size();
    return 0;
  }

  double train_step(RunStreams& streams) {
    if (qmix_) return qmix_->train_step(streams);
    if (iql_) return iql_->train_step(streams);
    throw UsageError("random policy has no training step");
  }

  double current_epsilon() const {
    if (qmix_) return qmix_->current_epsilon();
    if (iql_) return iql_->current_epsilon();
    return 1.0;
  }

  void reset() {
    if (qmix_) qmix_->reset();
    if (iql_) iql_->reset();
  }

  void for_each_theta(const std::function<void(const char*, ParamTensor&)>& f) {
    if (qmix_) qmix_->for_each_param(f);
    if (iql_) iql_->for_each_param(f);
  }
  void for_each_target(const std::function<void(const char*, ParamTensor&)>& f) {
    if (qmix_) qmix_->for_each_target_param(f);
    if (iql_) iql_->for_each_target_param(f);
  }
  std::span<ndmath::AdamState> adam_states() {
    if (qmix_) return qmix_->adam_states();
    if (iql_) return iql_->adam_states();
    return {};
  }

  qmixcore::ReplayBuffer* buffer() {
    if (qmix_) return &qmix_->buffer();
    if (iql_) return &iql_->buffer();
    return nullptr;
  }

  long slot_counter() const {
    if (qmix_) return qmix_->slot_counter();
    if (iql_) return iql_->slot_counter();
    return 0;
  }
  long eps_base() const {
    if (qmix_) return qmix_->eps_base();
    if (iql_) return iql_->eps_base();
    return 0;
  }
  long train_steps() const {
    if (qmix_) return qmix_->train_steps();
    if (iql_) return iql_->train_steps();
    return 0;
  }
  void set_counters(long slots, long eps_base, long steps) {
    if (qmix_) {
      qmix_->set_slot_counter(slots);
      qmix_->set_eps_base(eps_base);
      qmix_->set_train_steps(steps);
    }
    if (iql_) {
      iql_->set_slot_counter(slots);
      iql_->set_eps_base(eps_base);
      iql_->set_train_steps(steps);
    }
  }

 private:
  const ExperimentConfig& cfg_;
  agentnet::ActionSpace actions_;
  std::unique_ptr<QmixTrainer> qmix_;
  std::unique_ptr<IqlTrainer> iql_;
};

class Runner {
 public:
  explicit Runner(ExperimentConfig cfg)
      : cfg_(std::move(cfg)),
        algo_(cfg_),
        env_(build_env(cfg_)),
        streams_(fresh_streams(cfg_.seed)) {
    env_->init(streams_.env);
  }

  explicit Runner(const Checkpoint& ckpt)
      : cfg_(ckpt.config),
        algo_(cfg_),
        env_(build_env(cfg_)),
        streams_(fresh_streams(cfg_.seed)) {
    restore(ckpt);
  }

  RunSummary run(const std::string& metrics_override, int epoch_max_override) {
    const std::string metrics_path =
        resolve_output_path(metrics_override.empty() ? cfg_.metrics_path
                                                     : metrics_override);
    const std::string ckpt_path = resolve_output_path(cfg_.checkpoint_path);
    const int epoch_max =
        epoch_max_override >= 0 ? epoch_max_override : cfg_.epoch_max;

    const bool resuming = epoch_done_ > 0 && metrics_override.empty();
    MetricsWriter metrics(metrics_path, resuming);
    RunSummary summary;
    summary.metrics_path = metrics_path;
    summary.checkpoint_path = ckpt_path;

    for (int epoch = epoch_done_ + 1; epoch <= epoch_max; ++epoch) {
      env_->begin_epoch(epoch);
      std::vector<EpisodeStats> collected;
      collected.reserve(static_cast<std::size_t>(cfg_.episodes_per_epoch));
      for (int i = 0; i < cfg_.episodes_per_epoch; ++i) {
        EpisodeStats stats = algo_.collect(*env_, streams_);
        ++global_episode_;
        collected.push_back(stats);

        if (cfg_.env == "switching" && algo_.learns()) {
          if (!detector_.armed() &&
              algo_.current_epsilon() <= cfg_.epsilon_end + 1e-12) {
            detector_.arm();
          }
          const double rate = static_cast<double>(stats.successes) /
                              (static_cast<double>(cfg_.N) * cfg_.T);
          if (detector_.update(rate)) {
            algo_.reset();
            detector_.reset();
            ++reset_count_;
            summary.reset_episodes.push_back(global_episode_);
          }
        }
      }

      double mean_loss = 0.0;
      const std::size_t warm = std::max<std::size_t>(
          static_cast<std::size_t>(cfg_.B),
          static_cast<std::size_t>(cfg_.warmup_episodes));
      if (algo_.learns() && algo_.buffer_size() >= warm) {
        double sum = 0.0;
        for (int s = 0; s < cfg_.train_steps_per_epoch; ++s) {
          sum += algo_.train_step(streams_);
        }
        if (cfg_.train_steps_per_epoch > 0) {
          mean_loss = sum / cfg_.train_steps_per_epoch;
        }
      }

      long row_episode = global_episode_ -
                         static_cast<long>(collected.size()) + 1;
      for (const auto& stats : collected) {
        metrics.write(make_row(epoch, row_episode++, stats, cfg_.N, cfg_.T,
                               mean_loss, false));
        ++summary.episodes_logged;
      }

      if (cfg_.eval_interval > 0 && epoch % cfg_.eval_interval == 0) {
        summary.last_eval = eval_block(epoch, mean_loss, metrics, summary);
      }
      if (cfg_.checkpoint_interval > 0 &&
          epoch % cfg_.checkpoint_interval == 0) {
        epoch_done_ = epoch;
        save_checkpoint(ckpt_path, snapshot());
      }
      epoch_done_ = epoch;
      metrics.flush();
    }

    epoch_done_ = std::max(epoch_done_, epoch_max);
    save_checkpoint(ckpt_path, snapshot());
    summary.epochs_run = epoch_done_;
    return summary;
  }

  Checkpoint snapshot() const;
  void restore(const Checkpoint& ckpt);

 private:
  EvalSummary eval_block(int epoch, double mean_loss, MetricsWriter& metrics,
                         RunSummary& summary) {
    const std::uint64_t eval_master = [&] {
      Rng r = Rng::derive(cfg_.seed, kStreamEvalBase +
                                         static_cast<std::uint64_t>(epoch));
      return r.next_u64();
    }();
    auto env_copy = env_->clone();
    RunStreams es = eval_streams(eval_master);
    EvalSummary ev;
    ev.episodes = cfg_.eval_episodes;
    long total_bound = 0, total_successes = 0;
    for (int i = 0; i < cfg_.eval_episodes; ++i) {
      const EpisodeStats stats = algo_.evaluate(*env_copy, es);
      metrics.write(make_row(epoch, ++eval_episode_, stats, cfg_.N, cfg_.T,
                             mean_loss, true));
      ++summary.episodes_logged;
      const double rate = static_cast<double>(stats.successes) /
                          (static_cast<double>(cfg_.N) * cfg_.T);
      ev.mean_success_rate += rate;
      ev.mean_oracle_fraction += static_cast<double>(stats.oracle_bound) /
                                 (static_cast<double>(cfg_.N) * cfg_.T);
      ev.mean_successes += stats.successes;
      ev.mean_collisions += stats.collisions;
      ev.mean_reward += stats.total_reward;
      total_bound += stats.oracle_bound;
      total_successes += stats.successes;
    }
    const double denom = std::max(1, cfg_.eval_episodes);
    ev.mean_success_rate /= denom;
    ev.mean_oracle_fraction /= denom;
    ev.mean_successes /= denom;
    ev.mean_collisions /= denom;
    ev.mean_reward /= denom;
    ev.success_vs_oracle =
        total_bound > 0
            ? static_cast<double>(total_successes) / total_bound
            : 0.0;
    return ev;
  }

  ExperimentConfig cfg_;
  Algo algo_;
  std::unique_ptr<envsim::Environment> env_;
  RunStreams streams_;
  DegradationDetector detector_;
  int epoch_done_ = 0;
  long global_episode_ = 0;
  long eval_episode_ = 0;
  long reset_count_ = 0;
};

Checkpoint Runner::snapshot() const {
  Checkpoint ckpt;
  ckpt.config = cfg_;
  ckpt.add("counters", {5},
           {static_cast<double>(epoch_done_),
            static_cast<double>(global_episode_),
            static_cast<double>(eval_episode_),
            static_cast<double>(reset_count_),
            static_cast<double>(algo_.train_steps())});
  auto& self = const_cast<Runner&>(*this);
  ckpt.add_scalar("trainer.slot_counter",
                  static_cast<double>(self.algo_.slot_counter()));
  ckpt.add_scalar("trainer.eps_base",
                  static_cast<double>(self.algo_.eps_base()));
  ckpt.add("rng.env", {8}, rng_to_doubles(streams_.env));
  ckpt.add("rng.slot", {8}, rng_to_doubles(streams_.slot));
  ckpt.add("rng.eps", {8}, rng_to_doubles(streams_.eps));
  ckpt.add("rng.batch", {8}, rng_to_doubles(streams_.batch));
  ckpt.add("detector", {detector_.serialize().size()}, detector_.serialize());
  {
    std::vector<double> dyn;
    env_->save_dynamic(dyn);
    ckpt.add("env.dynamic", {dyn.size()}, dyn);
  }
  self.algo_.for_each_theta([&](const char* name, ParamTensor& t) {
    ckpt.add(std::string("theta.") + name, t.shape, t.values);
  });
  self.algo_.for_each_target([&](const char* name, ParamTensor& t) {
    ckpt.add(std::string("target.") + name, t.shape, t.values);
  });
  {
    auto states = self.algo_.adam_states();
    std::size_t idx = 0;
    self.algo_.for_each_theta([&](const char* name, ParamTensor& t) {
      (void)t;
      const auto& s = states[idx++];
      ckpt.add(std::string("adam.") + name + ".m", {s.m.size()}, s.m);
      ckpt.add(std::string("adam.") + name + ".v", {s.v.size()}, s.v);
      ckpt.add_scalar(std::string("adam.") + name + ".t",
                      static_cast<double>(s.t));
    });
  }
  if (const auto* buffer = const_cast<Runner&>(*this).algo_.buffer()) {
    const std::size_t count = buffer->size();
    const auto slots = static_cast<std::size_t>(cfg_.T);
    const auto channels = static_cast<std::size_t>(cfg_.K);
    const auto agents = static_cast<std::size_t>(cfg_.N);
    std::vector<double> states, obs, actions, rewards;
    states.reserve(count * (slots + 1) * channels);
    obs.reserve(count * (slots + 1) * agents * channels);
    actions.reserve(count * slots * agents);
    rewards.reserve(count * slots * agents);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& ep = buffer->at(i);
      for (auto v : ep.states) states.push_back(v);
      for (auto v : ep.obs) obs.push_back(v);
      for (auto v : ep.actions) actions.push_back(v);
      for (auto v : ep.rewards) rewards.push_back(v);
    }
    ckpt.add("buffer.states", {count, slots + 1, channels}, std::move(states));
    ckpt.add("buffer.obs", {count, slots + 1, agents, channels},
             std::move(obs));
    ckpt.add("buffer.actions", {count, slots, agents}, std::move(actions));
    ckpt.add("buffer.rewards", {count, slots, agents}, std::move(rewards));
  }
  return ckpt;
}

void Runner::restore(const Checkpoint& ckpt) {
  const auto& counters = ckpt.require("counters", 5);
  epoch_done_ = static_cast<int>(counters.values[0]);
  global_episode_ = static_cast<long>(counters.values[1]);
  eval_episode_ = static_cast<long>(counters.values[2]);
  reset_count_ = static_cast<long>(counters.values[3]);
  const long train_steps = static_cast<long>(counters.values[4]);
  algo_.set_counters(static_cast<long>(ckpt.scalar("trainer.slot_counter")),
                     static_cast<long>(ckpt.scalar("trainer.eps_base")),
                     train_steps);

  streams_.env = rng_from_doubles(ckpt.require("rng.env", 8).values);
  streams_.slot = rng_from_doubles(ckpt.require("rng.slot", 8).values);
  streams_.eps = rng_from_doubles(ckpt.require("rng.eps", 8).values);
  streams_.batch = rng_from_doubles(ckpt.require("rng.batch", 8).values);
  detector_.restore(ckpt.require("detector").values);
  env_->load_dynamic(ckpt.require("env.dynamic").values);

  algo_.for_each_theta([&](const char* name, ParamTensor& t) {
    const auto& a = ckpt.require(std::string("theta.") + name, t.size());
    t.values = a.values;
  });
  algo_.for_each_target([&](const char* name, ParamTensor& t) {
    const auto& a = ckpt.require(std::string("target.") + name, t.size());
    t.values = a.values;
  });
  {
    auto states = algo_.adam_states();
    std::size_t idx = 0;
    algo_.for_each_theta([&](const char* name, ParamTensor& t) {
      (void)t;
      auto& s = states[idx++];
      s.m = ckpt.require(std::string("adam.") + name + ".m", s.m.size()).values;
      s.v = ckpt.require(std::string("adam.") + name + ".v", s.v.size()).values;
      s.t = static_cast<std::int64_t>(
          ckpt.scalar(std::string("adam.") + name + ".t"));
    });
  }
  if (auto* buffer = algo_.buffer()) {
    buffer->clear();
    const auto& states = ckpt.require("buffer.states");
    const auto& obs = ckpt.require("buffer.obs");
    const auto& actions = ckpt.require("buffer.actions");
    const auto& rewards = ckpt.require("buffer.rewards");
    if (states.shape.empty() || states.shape.size() != 3) {
      throw DataError("checkpoint array 'buffer.states' has unexpected shape");
    }
    const std::size_t count = states.shape[0];
    const int slots = cfg_.T, channels = cfg_.K, agents = cfg_.N;
    const std::size_t state_len = static_cast<std::size_t>(slots + 1) * channels;
    const std::size_t obs_len =
        static_cast<std::size_t>(slots + 1) * agents * channels;
    const std::size_t act_len = static_cast<std::size_t>(slots) * agents;
    if (states.values.size() != count * state_len ||
        obs.values.size() != count * obs_len ||
        actions.values.size() != count * act_len ||
        rewards.values.size() != count * act_len) {
      throw DataError("checkpoint replay buffer arrays are inconsistent");
    }
    for (std::size_t i = 0; i < count; ++i) {
      auto ep = qmixcore::EpisodeRecord::empty(slots, channels, agents);
      for (std::size_t j = 0; j < state_len; ++j) {
        ep.states[j] = static_cast<std::int8_t>(states.values[i * state_len + j]);
      }
      for (std::size_t j = 0; j < obs_len; ++j) {
        ep.obs[j] = static_cast<std::int8_t>(obs.values[i * obs_len + j]);
      }
      for (std::size_t j = 0; j < act_len; ++j) {
        ep.actions[j] =
            static_cast<std::int32_t>(actions.values[i * act_len + j]);
        ep.rewards[j] =
            static_cast<std::int8_t>(rewards.values[i * act_len + j]);
      }
      buffer->store(std::move(ep));
    }
  }
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  Runner runner(cfg);
  return runner.run("", -1);
}

RunSummary resume_experiment(const std::string& checkpoint_path,
                             const std::string& metrics_override,
                             int epoch_max_override) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  Runner runner(ckpt);
  return runner.run(metrics_override, epoch_max_override);
}

EvalSummary evaluate(const Checkpoint& ckpt, int episodes,
                     std::uint64_t eval_seed,
                     const std::optional<ExperimentConfig>& env_override,
                     const std::string& csv_out) {
  if (episodes < 1) throw ConfigError("evaluate: episodes must be >= 1");
  const ExperimentConfig& cfg = ckpt.config;
  ExperimentConfig env_cfg = env_override.value_or(cfg);
  if (env_override.has_value()) {
    if (env_cfg.K != cfg.K || env_cfg.N != cfg.N || env_cfg.M != cfg.M) {
      throw ConfigError(
          "evaluate: env config disagrees with the checkpoint on K/N/M");
    }
    validate(env_cfg);
  }

  Algo algo(cfg);
  algo.for_each_theta([&](const char* name, ParamTensor& t) {
    const auto& a = ckpt.require(std::string("theta.") + name, t.size());
    t.values = a.values;
  });

  auto env = build_env(env_cfg);
  RunStreams streams = eval_streams(Rng::derive(eval_seed, 0).next_u64());
  env->init(streams.env);

  std::unique_ptr<MetricsWriter> writer;
  if (!csv_out.empty()) {
    writer = std::make_unique<MetricsWriter>(resolve_output_path(csv_out));
  }

  EvalSummary ev;
  ev.episodes = episodes;
  long total_bound = 0, total_successes = 0;
  const int epoch = static_cast<int>(ckpt.require("counters", 5).values[0]);
  for (int i = 0; i < episodes; ++i) {
    const EpisodeStats stats = algo.evaluate(*env, streams);
    if (writer) {
      writer->write(
          make_row(epoch, i + 1, stats, cfg.N, cfg.T, 0.0, true));
    }
    const double rate = static_cast<double>(stats.successes) /
                        (static_cast<double>(cfg.N) * cfg.T);
    ev.mean_success_rate += rate;
    ev.mean_oracle_fraction += static_cast<double>(stats.oracle_bound) /
                               (static_cast<double>(cfg.N) * cfg.T);
    ev.mean_successes += stats.successes;
    ev.mean_collisions += stats.collisions;
    ev.mean_reward += stats.total_reward;
    total_bound += stats.oracle_bound;
    total_successes += stats.successes;
  }
  ev.mean_success_rate /= episodes;
  ev.mean_oracle_fraction /= episodes;
  ev.mean_successes /= episodes;
  ev.mean_collisions /= episodes;
  ev.mean_reward /= episodes;
  ev.success_vs_oracle =
      total_bound > 0 ? static_cast<double>(total_successes) / total_bound
                      : 0.0;
  return ev;
}

EvalSummary evaluate(const std::string& checkpoint_path, int episodes,
                     std::uint64_t eval_seed,
                     const std::optional<ExperimentConfig>& env_override,
                     const std::string& csv_out) {
  return evaluate(load_checkpoint(checkpoint_path), episodes, eval_seed,
                  env_override, csv_out);
}

}  // namespace qmixdsa::harness
