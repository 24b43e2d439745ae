#include <CLI11.hpp>
#include <cstdio>
#include <optional>
#include <string>

#include "qmixdsa/error.hpp"
#include "qmixdsa/harness/config.hpp"
#include "qmixdsa/harness/experiment.hpp"
#include "qmixdsa/harness/plot.hpp"
#include "qmixdsa/ndmath/gradcheck.hpp"
#include "qmixdsa/qmixcore/trainer.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitUsage = 4;

using namespace qmixdsa;

void print_eval(const harness::EvalSummary& ev) {
  std::printf("episodes:            %d\n", ev.episodes);
  std::printf("mean success rate:   %.4f\n", ev.mean_success_rate);
  std::printf("mean oracle frac:    %.4f\n", ev.mean_oracle_fraction);
  std::printf("success vs oracle:   %.4f\n", ev.success_vs_oracle);
  std::printf("mean successes/ep:   %.2f\n", ev.mean_successes);
  std::printf("mean collisions/ep:  %.2f\n", ev.mean_collisions);
  std::printf("mean reward/ep:      %.2f\n", ev.mean_reward);
}

int cmd_train(const std::string& config_path, const std::string& resume) {
  harness::RunSummary summary;
  if (resume.empty()) {
    const auto cfg = harness::load_config(config_path);
    summary = harness::run_experiment(cfg);
  } else {
    summary = harness::resume_experiment(resume);
  }
  std::printf("epochs run:        %d\n", summary.epochs_run);
  std::printf("episodes logged:   %ld\n", summary.episodes_logged);
  std::printf("metrics:           %s\n", summary.metrics_path.c_str());
  std::printf("checkpoint:        %s\n", summary.checkpoint_path.c_str());
  for (long e : summary.reset_episodes) {
    std::printf("degradation reset at episode %ld\n", e);
  }
  if (summary.last_eval.has_value()) {
    std::printf("-- last evaluation block --\n");
    print_eval(*summary.last_eval);
  }
  return 0;
}

int cmd_eval(const std::string& ckpt, int episodes, std::uint64_t seed,
             const std::string& env_config, const std::string& out_csv) {
  std::optional<harness::ExperimentConfig> override_cfg;
  if (!env_config.empty()) {
    override_cfg = harness::load_config(env_config);
  }
  const auto ev = harness::evaluate(ckpt, episodes, seed, override_cfg, out_csv);
  print_eval(ev);
  return 0;
}

int cmd_oracle(const std::string& config_path, int episodes) {
  const auto cfg = harness::load_config(config_path);
  auto env = harness::build_env(cfg);
  Rng env_rng = Rng::derive(cfg.seed, harness::kStreamEnv);
  env->init(env_rng);
  long total_idle = 0, total_bound = 0;
  long slots_seen = 0;
  for (int e = 0; e < episodes; ++e) {
    env->begin_epoch(1);
    for (int t = 0; t < cfg.T; ++t) {
      const auto s = env->step(env_rng);
      int idle = 0;
      for (auto v : s) idle += v;
      total_idle += idle;
      total_bound += std::min(cfg.N, idle);
      ++slots_seen;
    }
  }
  std::printf("episodes:              %d\n", episodes);
  std::printf("mean idle channels:    %.4f\n",
              static_cast<double>(total_idle) / slots_seen);
  std::printf("mean bound/episode:    %.4f\n",
              static_cast<double>(total_bound) / episodes);
  std::printf("demand cap/episode:    %d\n", cfg.N * cfg.T);
  std::printf("oracle fraction:       %.4f\n",
              static_cast<double>(total_bound) / (slots_seen * cfg.N));
  return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
  using qmixcore::EpisodeRecord;
  using qmixcore::QmixTrainer;
  using qmixcore::RunStreams;

  qmixcore::TrainSettings cfg;
  cfg.channels = 6;
  cfg.agents = 2;
  cfg.sense_size = 2;
  cfg.slots = 4;
  QmixTrainer trainer(cfg, seed);

  auto env = std::make_unique<envsim::MarkovChannels>(
      envsim::init_markov(6, seed + 1));
  RunStreams streams{Rng::derive(seed, 1), Rng::derive(seed, 2),
                     Rng::derive(seed, 3), Rng::derive(seed, 4)};
  env->init(streams.env);
  trainer.collect_and_store(*env, streams);
  const EpisodeRecord ep = trainer.buffer().at(0);
  std::vector<const EpisodeRecord*> batch{&ep};

  // Evaluate at a generic point: zero-initialized biases sit exactly on
  // relu/abs kinks where subgradients and central differences disagree.
  std::vector<ndmath::ParamTensor*> params;
  trainer.params().for_each(
      [&](const char*, ndmath::ParamTensor& t) { params.push_back(&t); });
  Rng jitter(seed + 2);
  for (auto* p : params) {
    for (double& v : p->values) v += jitter.uniform(-0.05, 0.05);
  }

  std::vector<ndmath::ParamTensor*> agent_params;
  trainer.params().agent.for_each([&](const char*, ndmath::ParamTensor& t) {
    agent_params.push_back(&t);
  });
  const auto& as = trainer.action_space();
  const int agents = cfg.agents;

  auto agent_fn = [&]() {
    ndmath::Tape tape;
    auto ids = agentnet::AgentNetIds::bind(tape, trainer.params().agent);
    auto input = agentnet::encode_input(ep.observation(0, 0), std::nullopt, 0,
                                        as.count(), agents);
    auto h = agentnet::agent_trunk_taped(tape, ids, input, tape.zeros(64));
    auto input1 = agentnet::encode_input(ep.observation(1, 0),
                                         std::uint64_t(ep.action(0, 0)), 0,
                                         as.count(), agents);
    h = agentnet::agent_trunk_taped(tape, ids, input1, h);
    auto q = agentnet::agent_q_at_taped(tape, ids, h, ep.action(1, 0));
    auto loss = tape.sq_diff(q, 1.0);
    tape.backward(loss);
    return tape.value(loss)[0];
  };
  const double agent_err = ndmath::grad_check(agent_fn, agent_params, 1e-4, 50);

  std::vector<ndmath::ParamTensor*> mixer_params;
  trainer.params().mixer.for_each([&](const char*, ndmath::ParamTensor& t) {
    mixer_params.push_back(&t);
  });
  auto mixer_fn = [&]() {
    ndmath::Tape tape;
    auto ids = qmixcore::MixerIds::bind(tape, trainer.params().mixer);
    auto qs = tape.constant({0.4, -0.9});
    auto out = qmixcore::mix_taped(tape, ids, qs, ep.state(0), 32, agents);
    auto loss = tape.sq_diff(out, 0.3);
    tape.backward(loss);
    return tape.value(loss)[0];
  };
  const double mixer_err = ndmath::grad_check(mixer_fn, mixer_params, 1e-4, 50);

  auto& theta = trainer.params();
  const auto& target = trainer.target();
  auto loss_fn = [&]() {
    return qmixcore::qmix_loss(batch, theta, target, as, 1.0, true);
  };
  const double loss_err = ndmath::grad_check(loss_fn, params, 1e-4, 50);

  std::printf("agent network max rel err: %.3e\n", agent_err);
  std::printf("mixing network max rel err: %.3e\n", mixer_err);
  std::printf("full loss max rel err: %.3e\n", loss_err);
  const bool ok = agent_err < 1e-4 && mixer_err < 1e-4 && loss_err < 1e-4;
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QMIX-based dynamic spectrum access: training, evaluation and "
               "analysis"};
  app.require_subcommand(1);

  std::string config_path, resume_path;
  auto* train = app.add_subcommand("train", "Run a training experiment");
  train->add_option("config", config_path, "Experiment config file");
  train->add_option("--resume", resume_path, "Continue from a checkpoint");

  std::string ckpt_path, eval_env_config, eval_out;
  int eval_episodes = 200;
  std::uint64_t eval_seed = 1;
  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  eval->add_option("checkpoint", ckpt_path, "Checkpoint file")->required();
  eval->add_option("--episodes", eval_episodes, "Number of greedy episodes");
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_option("--env-config", eval_env_config,
                   "Evaluate on this env instead of the checkpoint's");
  eval->add_option("--out", eval_out, "Write per-episode metrics CSV here");

  std::string oracle_config;
  int oracle_episodes = 200;
  auto* oracle = app.add_subcommand("oracle", "Oracle capacity of an env");
  oracle->add_option("config", oracle_config, "Experiment config file")
      ->required();
  oracle->add_option("--episodes", oracle_episodes, "Episodes to simulate");

  std::uint64_t gc_seed = 7;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("--seed", gc_seed, "Seed for the checked networks");

  std::string plot_csv, plot_svg;
  auto* plot = app.add_subcommand("plot", "Render a metrics CSV as SVG");
  plot->add_option("csv", plot_csv, "Metrics CSV")->required();
  plot->add_option("svg", plot_svg, "Output SVG path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (config_path.empty() && resume_path.empty()) {
        throw qmixdsa::ConfigError("train requires a config file or --resume");
      }
      return cmd_train(config_path, resume_path);
    }
    if (eval->parsed()) {
      return cmd_eval(ckpt_path, eval_episodes, eval_seed, eval_env_config,
                      eval_out);
    }
    if (oracle->parsed()) return cmd_oracle(oracle_config, oracle_episodes);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed);
    if (plot->parsed()) {
      qmixdsa::harness::export_plot(plot_csv, plot_svg);
      std::printf("wrote %s\n", plot_svg.c_str());
      return 0;
    }
  } catch (const qmixdsa::ConfigError& e) {
    std::fprintf(stderr, "error (configuration): %s\n", e.what());
    return kExitConfig;
  } catch (const qmixdsa::DataError& e) {
    std::fprintf(stderr, "error (data): %s\n", e.what());
    return kExitData;
  } catch (const qmixdsa::UsageError& e) {
    std::fprintf(stderr, "error (usage): %s\n", e.what());
    return kExitUsage;
  }
  return 0;
}
