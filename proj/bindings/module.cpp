#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "qmixdsa/agentnet/actions.hpp"
#include "qmixdsa/agentnet/drqn.hpp"
#include "qmixdsa/baselines/oracle.hpp"
#include "qmixdsa/envsim/channels.hpp"
#include "qmixdsa/envsim/slot.hpp"
#include "qmixdsa/error.hpp"
#include "qmixdsa/harness/config.hpp"
#include "qmixdsa/harness/experiment.hpp"
#include "qmixdsa/harness/plot.hpp"

namespace py = pybind11;
using namespace qmixdsa;

namespace {

// Thin wrapper owning an environment plus its step stream so Python users
// do not have to manage Rng objects.
class PyEnv {
 public:
  PyEnv(std::unique_ptr<envsim::Environment> env, std::uint64_t seed)
      : env_(std::move(env)), rng_(seed) {
    env_->init(rng_);
  }

  int channel_count() const { return env_->channel_count(); }
  std::vector<int> step() {
    const auto s = env_->step(rng_);
    return {s.begin(), s.end()};
  }
  std::vector<int> current() const {
    const auto s = env_->current();
    return {s.begin(), s.end()};
  }
  void begin_epoch(int epoch) { env_->begin_epoch(epoch); }

 private:
  std::unique_ptr<envsim::Environment> env_;
  Rng rng_;
};

harness::ExperimentConfig config_from_text(const std::string& text) {
  auto cfg = harness::parse_config_text(text);
  harness::validate(cfg);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(qmixdsa, m) {
  m.doc() = "QMIX-based dynamic spectrum access: simulator, trainer and "
            "evaluation tools";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<DataError>(m, "DataError");
  py::register_exception<UsageError>(m, "UsageError");

  py::class_<agentnet::ActionSpace>(m, "ActionSpace")
      .def(py::init<int, int>(), py::arg("channels"), py::arg("sense_size"))
      .def_property_readonly("count", &agentnet::ActionSpace::count)
      .def("unrank", &agentnet::ActionSpace::unrank, py::arg("index"))
      .def("rank", [](const agentnet::ActionSpace& as, std::vector<int> subset) {
        return as.rank(subset);
      }, py::arg("subset"));

  py::class_<agentnet::EpsilonSchedule>(m, "EpsilonSchedule")
      .def(py::init([](double start, double end, long decay_steps) {
             return agentnet::EpsilonSchedule{start, end, decay_steps};
           }),
           py::arg("start") = 0.4, py::arg("end") = 0.05,
           py::arg("decay_steps") = 10000)
      .def("at", &agentnet::EpsilonSchedule::at, py::arg("step"));

  m.def("observe",
        [](std::vector<std::uint8_t> state, std::vector<int> sense) {
          const auto obs = envsim::observe(state, sense);
          return py::make_tuple(
              std::vector<int>(obs.values.begin(), obs.values.end()),
              std::vector<int>(obs.sensed.begin(), obs.sensed.end()));
        },
        py::arg("state"), py::arg("sense"),
        "Masked per-channel view (values, sensed-mask) of one slot");

  m.def("resolve_slot",
        [](std::vector<std::uint8_t> state,
           std::vector<std::vector<int>> joint_sense, std::uint64_t seed) {
          Rng rng(seed);
          std::vector<envsim::SenseSet> sets(joint_sense.begin(),
                                             joint_sense.end());
          const auto out = envsim::resolve_slot(state, sets, rng);
          py::dict d;
          d["transmit_channel"] = out.transmit_channel;
          d["rewards"] = out.rewards;
          d["transmitter_count"] = out.transmitter_count;
          d["total_reward"] = out.total_reward;
          return d;
        },
        py::arg("state"), py::arg("joint_sense"), py::arg("seed") = 0);

  m.def("oracle_slot_bound",
        [](std::vector<std::uint8_t> state, int users) {
          return envsim::oracle_slot_bound(state, users);
        },
        py::arg("state"), py::arg("users"));

  py::class_<PyEnv>(m, "Environment")
      .def_property_readonly("channel_count", &PyEnv::channel_count)
      .def("step", &PyEnv::step)
      .def("current", &PyEnv::current)
      .def("begin_epoch", &PyEnv::begin_epoch, py::arg("epoch"));

  m.def("make_env",
        [](const std::string& config_text, std::uint64_t seed) {
          const auto cfg = config_from_text(config_text);
          return PyEnv(harness::build_env(cfg), seed);
        },
        py::arg("config_text"), py::arg("seed") = 1,
        "Builds the channel process described by a config snippet");

  py::class_<harness::ExperimentConfig>(m, "ExperimentConfig")
      .def_static("from_text", &config_from_text, py::arg("text"))
      .def_static("from_file", &harness::load_config, py::arg("path"))
      .def("to_text", [](const harness::ExperimentConfig& cfg) {
        return harness::serialize_config(cfg);
      })
      .def_readwrite("K", &harness::ExperimentConfig::K)
      .def_readwrite("N", &harness::ExperimentConfig::N)
      .def_readwrite("M", &harness::ExperimentConfig::M)
      .def_readwrite("T", &harness::ExperimentConfig::T)
      .def_readwrite("epoch_max", &harness::ExperimentConfig::epoch_max)
      .def_readwrite("seed", &harness::ExperimentConfig::seed)
      .def_readwrite("algorithm", &harness::ExperimentConfig::algorithm)
      .def_readwrite("env", &harness::ExperimentConfig::env)
      .def_readwrite("metrics_path", &harness::ExperimentConfig::metrics_path)
      .def_readwrite("checkpoint_path",
                     &harness::ExperimentConfig::checkpoint_path);

  py::class_<harness::EvalSummary>(m, "EvalSummary")
      .def_readonly("episodes", &harness::EvalSummary::episodes)
      .def_readonly("mean_success_rate",
                    &harness::EvalSummary::mean_success_rate)
      .def_readonly("mean_oracle_fraction",
                    &harness::EvalSummary::mean_oracle_fraction)
      .def_readonly("success_vs_oracle",
                    &harness::EvalSummary::success_vs_oracle)
      .def_readonly("mean_successes", &harness::EvalSummary::mean_successes)
      .def_readonly("mean_collisions", &harness::EvalSummary::mean_collisions)
      .def_readonly("mean_reward", &harness::EvalSummary::mean_reward);

  py::class_<harness::RunSummary>(m, "RunSummary")
      .def_readonly("epochs_run", &harness::RunSummary::epochs_run)
      .def_readonly("episodes_logged", &harness::RunSummary::episodes_logged)
      .def_readonly("reset_episodes", &harness::RunSummary::reset_episodes)
      .def_readonly("metrics_path", &harness::RunSummary::metrics_path)
      .def_readonly("checkpoint_path", &harness::RunSummary::checkpoint_path)
      .def_property_readonly("last_eval",
                             [](const harness::RunSummary& s)
                                 -> std::optional<harness::EvalSummary> {
                               return s.last_eval;
                             });

  m.def("run_experiment", &harness::run_experiment, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());

  m.def("resume_experiment", &harness::resume_experiment,
        py::arg("checkpoint_path"), py::arg("metrics_override") = "",
        py::arg("epoch_max_override") = -1,
        py::call_guard<py::gil_scoped_release>());

  m.def("evaluate",
        [](const std::string& checkpoint_path, int episodes,
           std::uint64_t seed, const std::string& csv_out) {
          return harness::evaluate(checkpoint_path, episodes, seed,
                                   std::nullopt, csv_out);
        },
        py::arg("checkpoint_path"), py::arg("episodes") = 200,
        py::arg("seed") = 1, py::arg("csv_out") = "",
        py::call_guard<py::gil_scoped_release>());

  m.def("export_plot", &harness::export_plot, py::arg("metrics_csv_path"),
        py::arg("svg_path"));
}
