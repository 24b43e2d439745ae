#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "qmixdsa/envsim/channels.hpp"
#include "qmixdsa/envsim/slot.hpp"
#include "qmixdsa/error.hpp"

using namespace qmixdsa;
using namespace qmixdsa::envsim;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("init_markov is deterministic under a seed and rows sum to 1") {
  const auto a = init_markov(16, std::uint64_t{7});
  const auto b = init_markov(16, std::uint64_t{7});
  REQUIRE(a.channel_count() == 16);
  for (int k = 0; k < 16; ++k) {
    CHECK(a.busy_to_idle[k] == b.busy_to_idle[k]);
    CHECK(a.idle_to_busy[k] == b.idle_to_busy[k]);
    // Rows of [[1-x, x], [y, 1-y]] sum to 1 by construction; check ranges.
    CHECK(a.busy_to_idle[k] > 0.05);
    CHECK(a.busy_to_idle[k] < 0.95);
    CHECK((1.0 - a.busy_to_idle[k]) + a.busy_to_idle[k] == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(init_markov(0, std::uint64_t{1}), ConfigError);
  CHECK_THROWS_AS(init_markov(4, std::uint64_t{1}, 0.5, 0.2), ConfigError);
}

TEST_CASE("markov empirical idle fraction matches the stationary distribution") {
  const int k_channels = 4;
  MarkovChannels env(init_markov(k_channels, std::uint64_t{11}));
  Rng rng(42);
  env.init(rng);
  std::array<long, 4> idle{};
  const long steps = 1000000;
  for (long t = 0; t < steps; ++t) {
    const auto s = env.step(rng);
    for (int k = 0; k < k_channels; ++k) idle[k] += s[k];
  }
  for (int k = 0; k < k_channels; ++k) {
    const double frac = static_cast<double>(idle[k]) / steps;
    CHECK(std::fabs(frac - env.model().stationary_idle(k)) < 0.01);
  }
}

TEST_CASE("markov absorbing idle state stays idle") {
  MarkovChannelSet m;
  m.busy_to_idle = {0.3, 0.3};
  m.idle_to_busy = {0.0, 0.0};  // p11 = 1
  MarkovChannels env(m);
  Rng rng(5);
  std::vector<double> all_idle{1.0, 1.0};
  env.load_dynamic(all_idle);
  for (int t = 0; t < 100; ++t) {
    const auto s = env.step(rng);
    CHECK(s[0] == 1);
    CHECK(s[1] == 1);
  }
}

TEST_CASE("periodic rotation and capacity") {
  PeriodicChannels env(16, 1.0);  // forced switch
  Rng rng(3);
  env.init(rng);
  CHECK(env.idle_group() == 0);
  const auto s = env.step(rng);
  CHECK(env.idle_group() == 1);
  for (int k = 0; k < 16; ++k) {
    const bool expect_idle = k >= 4 && k < 8;
    CHECK(s[k] == (expect_idle ? 1 : 0));
  }
}

TEST_CASE("periodic env keeps exactly four idle channels and rotates at 0.75") {
  PeriodicChannels env(16, 0.75);
  Rng rng(17);
  env.init(rng);
  int prev_group = env.idle_group();
  long switches = 0;
  const long steps = 100000;
  for (long t = 0; t < steps; ++t) {
    const auto s = env.step(rng);
    int idle = 0;
    for (auto v : s) idle += v;
    REQUIRE(idle == 4);
    if (env.idle_group() != prev_group) ++switches;
    prev_group = env.idle_group();
  }
  const double rate = static_cast<double>(switches) / steps;
  CHECK(std::fabs(rate - 0.75) < 0.02);
}

TEST_CASE("correlated followers always copy or invert their leader") {
  Rng structure(9);
  CorrelatedChannels env(16, 0.3, structure);
  Rng rng(21);
  env.init(rng);
  for (int t = 0; t < 10000; ++t) {
    const auto s = env.step(rng);
    for (int k = 0; k < 16; ++k) {
      const auto leader = env.leader_state(env.subset_of(k));
      const auto expect = env.inverted(k) ? (leader ^ 1) : leader;
      REQUIRE(s[k] == expect);
    }
  }
}

TEST_CASE("correlated mean idle count is half the channels") {
  Rng structure(2);
  CorrelatedChannels env(16, 0.3, structure);
  Rng rng(23);
  env.init(rng);
  double idle_sum = 0.0;
  const long steps = 1000000;
  for (long t = 0; t < steps; ++t) {
    const auto s = env.step(rng);
    int idle = 0;
    for (auto v : s) idle += v;
    idle_sum += idle;
  }
  CHECK(std::fabs(idle_sum / steps - 8.0) < 0.05);
}

TEST_CASE("observe reveals sensed channels and masks the rest") {
  const ChannelState s{1, 0, 1, 0};
  const auto obs = observe(s, SenseSet{0, 1});
  CHECK(obs.values[0] == 1);
  CHECK(obs.values[1] == 0);
  CHECK(obs.values[2] == -1);
  CHECK(obs.values[3] == -1);
  CHECK(obs.sensed[0] == 1);
  CHECK(obs.sensed[2] == 0);
}

TEST_CASE("observe with full sensing reproduces the state") {
  const ChannelState s{0, 1, 1, 0, 1};
  const auto obs = observe(s, SenseSet{0, 1, 2, 3, 4});
  for (int k = 0; k < 5; ++k) CHECK(obs.values[k] == static_cast<int>(s[k]));
}

TEST_CASE("observe single channel") {
  const ChannelState s{0, 1, 1, 0};
  const auto obs = observe(s, SenseSet{2});
  int revealed = 0;
  for (int k = 0; k < 4; ++k) {
    if (obs.values[k] != -1) {
      ++revealed;
      CHECK(k == 2);
      CHECK(obs.values[k] == 1);
    }
  }
  CHECK(revealed == 1);
  CHECK_THROWS_AS(observe(s, SenseSet{4}), UsageError);
  CHECK_THROWS_AS(observe(s, SenseSet{1, 1}), UsageError);
}

TEST_CASE("observation masking invariant, exhaustive for small channel sets") {
  for (int channels = 1; channels <= 5; ++channels) {
    for (int mask = 0; mask < (1 << channels); ++mask) {
      ChannelState s(channels);
      for (int k = 0; k < channels; ++k) s[k] = (mask >> k) & 1;
      for (int pick = 1; pick < (1 << channels); ++pick) {
        SenseSet sense;
        for (int k = 0; k < channels; ++k) {
          if ((pick >> k) & 1) sense.push_back(k);
        }
        const auto obs = observe(s, sense);
        for (int k = 0; k < channels; ++k) {
          if (obs.sensed[k]) {
            REQUIRE(obs.values[k] == static_cast<int>(s[k]));
          } else {
            REQUIRE(obs.values[k] == -1);
          }
        }
      }
    }
  }
}

TEST_CASE("resolve_slot success, silence and forced collision") {
  Rng rng(1);
  const ChannelState s{1, 0, 0, 1};

  SUBCASE("lone user with an idle sensed channel succeeds") {
    const std::vector<SenseSet> joint{{0, 1}};
    const auto out = resolve_slot(s, joint, rng);
    CHECK(out.rewards[0] == kRewardSuccess);
    CHECK(out.transmit_channel[0] == 0);
    CHECK(out.total_reward == 2);
  }

  SUBCASE("lone user sensing only busy channels stays silent") {
    const std::vector<SenseSet> joint{{1, 2}};
    const auto out = resolve_slot(s, joint, rng);
    CHECK(out.rewards[0] == kRewardSilent);
    CHECK(out.transmit_channel[0] == -1);
  }

  SUBCASE("two users forced onto the same idle channel collide") {
    const std::vector<SenseSet> joint{{0}, {0}};
    const auto out = resolve_slot(s, joint, rng);
    CHECK(out.rewards[0] == kRewardCollision);
    CHECK(out.rewards[1] == kRewardCollision);
    CHECK(out.total_reward == -2);
  }
}

TEST_CASE("reward accounting identity holds on random slots") {
  Rng rng(99);
  Rng scenario(7);
  for (int trial = 0; trial < 2000; ++trial) {
    const int channels = 2 + scenario.uniform_int(6);
    const int users = 1 + scenario.uniform_int(5);
    const int m = 1 + scenario.uniform_int(channels);
    ChannelState s(channels);
    for (auto& v : s) v = scenario.bernoulli(0.5) ? 1 : 0;
    std::vector<SenseSet> joint(users);
    for (auto& sense : joint) {
      // Distinct random channels.
      std::vector<int> all(channels);
      for (int k = 0; k < channels; ++k) all[k] = k;
      for (int i = 0; i < m; ++i) {
        const int j = i + scenario.uniform_int(channels - i);
        std::swap(all[i], all[j]);
      }
      sense.assign(all.begin(), all.begin() + m);
    }
    const auto out = resolve_slot(s, joint, rng);

    int singles = 0, collided_users = 0;
    for (int k = 0; k < channels; ++k) {
      if (out.transmitter_count[k] == 1) ++singles;
      if (out.transmitter_count[k] >= 2) collided_users += out.transmitter_count[k];
      // No transmissions on busy channels.
      if (s[k] == 0) REQUIRE(out.transmitter_count[k] == 0);
    }
    REQUIRE(out.total_reward == 2 * singles - collided_users);
    REQUIRE(out.total_reward == total_reward(out));
  }
}

TEST_CASE("total_reward sums per-user rewards") {
  SlotOutcome o;
  o.rewards = {0, 0, 0};
  CHECK(total_reward(o) == 0);
  o.rewards = {2, 2, -1};
  CHECK(total_reward(o) == 3);
}

TEST_CASE("switching env uses the first process before the switch epoch") {
  auto first = std::make_unique<PeriodicChannels>(16, 1.0);
  auto second = std::make_unique<PeriodicChannels>(16, 0.0);
  auto env = make_switching_env(std::move(first), std::move(second), 150);
  Rng rng(3);
  env->init(rng);

  env->begin_epoch(149);
  auto* sw = dynamic_cast<SwitchingChannels*>(env.get());
  REQUIRE(sw != nullptr);
  CHECK_FALSE(sw->switched());
  env->begin_epoch(150);
  CHECK(sw->switched());

  auto a = std::make_unique<PeriodicChannels>(8, 1.0);
  auto b = std::make_unique<PeriodicChannels>(16, 1.0);
  CHECK_THROWS_AS(make_switching_env(std::move(a), std::move(b), 10),
                  ConfigError);
}

TEST_CASE("trace round-trip, validation errors and exhaustion") {
  const std::string path = temp_path("qmixdsa_trace_test.csv");

  TraceTable table;
  table.channels = 3;
  for (int t = 0; t < 100; ++t) {
    table.rows.push_back(t % 2);
    table.rows.push_back(1);
    table.rows.push_back(0);
  }
  save_trace(path, table);
  const auto loaded = load_trace(path, 3);
  CHECK(loaded.slot_count() == 100);
  CHECK(loaded.rows == table.rows);

  SUBCASE("non-binary entry cites the row") {
    std::ofstream out(path, std::ios::binary);
    out << "slot,ch1,ch2,ch3\n";
    for (int t = 1; t <= 10; ++t) {
      out << t << (t == 7 ? ",2,0,1\n" : ",1,0,1\n");
    }
    out.close();
    try {
      (void)load_trace(path, 3);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("7") != std::string::npos);
    }
  }

  SUBCASE("wrong column count is a data error") {
    std::ofstream out(path, std::ios::binary);
    out << "slot,ch1,ch2,ch3\n1,1,0\n";
    out.close();
    CHECK_THROWS_AS(load_trace(path, 3), DataError);
  }

  SUBCASE("stepping past the last row is a data error") {
    TraceTable small;
    small.channels = 2;
    small.rows = {1, 0, 0, 1};
    TraceChannels env(std::move(small));
    Rng rng(1);
    env.init(rng);
    (void)env.step(rng);
    (void)env.step(rng);
    CHECK_THROWS_AS(env.step(rng), DataError);
  }

  std::remove(path.c_str());
}

TEST_CASE("oracle slot bound") {
  const ChannelState none{0, 0, 0};
  CHECK(oracle_slot_bound(none, 3) == 0);
  const ChannelState many{1, 1, 1, 1, 1, 1, 1};
  CHECK(oracle_slot_bound(many, 3) == 3);
  CHECK(oracle_slot_bound(many, 10) == 7);
}
