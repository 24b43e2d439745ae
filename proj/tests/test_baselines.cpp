#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "qmixdsa/baselines/oracle.hpp"
#include "qmixdsa/baselines/policies.hpp"
#include "qmixdsa/error.hpp"
#include "qmixdsa/ndmath/gradcheck.hpp"

using namespace qmixdsa;
using namespace qmixdsa::baselines;
using qmixcore::RunStreams;

namespace {

RunStreams make_streams(std::uint64_t seed) {
  return RunStreams{Rng::derive(seed, 1), Rng::derive(seed, 2),
                    Rng::derive(seed, 3), Rng::derive(seed, 4)};
}

}  // namespace

TEST_CASE("oracle per-slot bound and episode accounting") {
  std::vector<envsim::ChannelState> states;
  states.push_back({0, 0, 0, 0});           // no idle channels
  states.push_back({1, 1, 1, 1});           // user-limited
  states.push_back({1, 0, 1, 0});           // 2 idle
  const auto report = oracle_upper_bound(states, 3);
  CHECK(report.max_successes[0] == 0);
  CHECK(report.max_successes[1] == 3);
  CHECK(report.max_successes[2] == 2);
  CHECK(report.episode_total == 5);
  CHECK(report.demand_cap == 9);
  CHECK(report.idle_counts[1] == 4);
}

TEST_CASE("oracle bound respects the demand cap over a full episode") {
  // 20 slots with at least 3 idle channels and 3 users: bound = 60.
  std::vector<envsim::ChannelState> states(20, envsim::ChannelState{1, 1, 1, 0, 1});
  const auto report = oracle_upper_bound(states, 3);
  CHECK(report.episode_total == 60);
  CHECK(report.episode_total <= report.demand_cap);
}

TEST_CASE("adding a user never lowers the per-slot bound") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    envsim::ChannelState s(8);
    for (auto& v : s) v = rng.bernoulli(0.4) ? 1 : 0;
    for (int users = 1; users < 6; ++users) {
      CHECK(envsim::oracle_slot_bound(s, users + 1) >=
            envsim::oracle_slot_bound(s, users));
    }
  }
}

TEST_CASE("random policy rollouts are deterministic and oracle-dominated") {
  agentnet::ActionSpace actions(6, 2);
  auto run = [&](std::uint64_t seed) {
    auto env = std::make_unique<envsim::MarkovChannels>(
        envsim::init_markov(6, std::uint64_t{15}));
    auto streams = make_streams(seed);
    env->init(streams.env);
    std::vector<int> out;
    for (int e = 0; e < 20; ++e) {
      const auto st = random_policy_episode(*env, actions, 3, 20, streams);
      out.push_back(st.successes);
      out.push_back(st.collisions);
      out.push_back(st.oracle_bound);
      CHECK(st.successes <= st.oracle_bound);
      CHECK(st.successes + st.collisions + st.silent == 3 * 20);
    }
    return out;
  };
  const auto a = run(42);
  const auto b = run(42);
  CHECK(a == b);
}

TEST_CASE("single user on always-idle channels always succeeds") {
  // Two channels that never go busy.
  envsim::MarkovChannelSet m;
  m.busy_to_idle = {0.99, 0.99};
  m.idle_to_busy = {1e-12, 1e-12};
  auto env = std::make_unique<envsim::MarkovChannels>(m);
  agentnet::ActionSpace actions(2, 1);
  auto streams = make_streams(5);
  std::vector<double> idle{1.0, 1.0};
  env->load_dynamic(idle);
  const auto st = random_policy_episode(*env, actions, 1, 20, streams);
  CHECK(st.successes == 20);
  CHECK(st.collisions == 0);
}

TEST_CASE("iql trainer is deterministic under a seed") {
  auto run = [](std::uint64_t seed) {
    qmixcore::TrainSettings cfg;
    cfg.channels = 6;
    cfg.agents = 2;
    cfg.sense_size = 2;
    cfg.slots = 4;
    cfg.batch_size = 4;
    IqlTrainer trainer(cfg, seed);
    auto env = std::make_unique<envsim::MarkovChannels>(
        envsim::init_markov(6, std::uint64_t{31}));
    auto streams = make_streams(seed);
    env->init(streams.env);
    std::vector<double> out;
    for (int epoch = 0; epoch < 3; ++epoch) {
      const auto result = trainer.train_epoch(*env, streams, 4, 2);
      out.push_back(result.mean_loss);
      for (const auto& e : result.episodes) out.push_back(e.total_reward);
    }
    return out;
  };
  const auto a = run(7);
  const auto b = run(7);
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("iql loss gradients pass the finite-difference check") {
  qmixcore::TrainSettings cfg;
  cfg.channels = 4;
  cfg.agents = 2;
  cfg.sense_size = 1;
  cfg.slots = 3;
  IqlTrainer trainer(cfg, 19);
  auto env = std::make_unique<envsim::MarkovChannels>(
      envsim::init_markov(4, std::uint64_t{9}));
  auto streams = make_streams(3);
  env->init(streams.env);
  trainer.collect_and_store(*env, streams);
  const qmixcore::EpisodeRecord ep = trainer.buffer().at(0);
  std::vector<const qmixcore::EpisodeRecord*> batch{&ep};

  std::vector<ndmath::ParamTensor*> params(trainer.param_ptrs().begin(),
                                           trainer.param_ptrs().end());
  Rng jitter(11);
  for (auto* p : params) {
    for (double& v : p->values) v += jitter.uniform(-0.05, 0.05);
  }
  auto fn = [&]() { return trainer.loss(batch, true); };
  CHECK(ndmath::grad_check(fn, params, 1e-4, 30) < 1e-4);
}

TEST_CASE("single agent learns a near-oracle policy on four channels") {
  // With one user QMIX and IQL coincide up to the scalar mixing transform;
  // both reduce to single-agent Q-learning. Train the IQL side and require
  // at least 90% of the oracle bound under greedy evaluation.
  qmixcore::TrainSettings cfg;
  cfg.channels = 4;
  cfg.agents = 1;
  cfg.sense_size = 2;
  cfg.slots = 20;
  IqlTrainer trainer(cfg, 21);

  auto env = std::make_unique<envsim::MarkovChannels>(
      envsim::init_markov(4, std::uint64_t{3}));
  auto streams = make_streams(17);
  env->init(streams.env);
  for (int epoch = 0; epoch < 60; ++epoch) {
    (void)trainer.train_epoch(*env, streams, 10, 8);
  }

  auto eval_env = env->clone();
  auto eval_streams = make_streams(4242);
  long successes = 0, bound = 0;
  for (int e = 0; e < 50; ++e) {
    const auto st = trainer.evaluate_episode(*eval_env, eval_streams);
    successes += st.successes;
    bound += st.oracle_bound;
  }
  CHECK(static_cast<double>(successes) >= 0.9 * static_cast<double>(bound));
}
