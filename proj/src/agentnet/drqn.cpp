#include "qmixdsa/agentnet/drqn.hpp"

#include <algorithm>
#include <string>

#include "qmixdsa/error.hpp"

namespace qmixdsa::agentnet {

using ndmath::Act;
using ndmath::ParamTensor;
using ndmath::Tape;

std::vector<double> AgentInput::to_dense() const {
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  for (int i : active) v[static_cast<std::size_t>(i)] = 1.0;
  return v;
}

AgentInput encode_input(std::span<const std::int8_t> observation,
                        std::optional<std::uint64_t> last_action, int agent_id,
                        std::uint64_t action_count, int agents) {
  const int channels = static_cast<int>(observation.size());
  AgentInput in;
  in.dim = 3 * channels + static_cast<int>(action_count) + agents;
  in.active.reserve(channels + 2);
  for (int k = 0; k < channels; ++k) {
    int slot;
    switch (observation[k]) {
      case -1: slot = 0; break;
      case 0: slot = 1; break;
      case 1: slot = 2; break;
      default:
        throw UsageError("encode_input: observation value out of range");
    }
    in.active.push_back(3 * k + slot);
  }
  if (last_action.has_value()) {
    if (*last_action >= action_count) {
      throw UsageError("encode_input: last action out of range");
    }
    in.active.push_back(3 * channels + static_cast<int>(*last_action));
  }
  if (agent_id < 0 || agent_id >= agents) {
    throw UsageError("encode_input: agent id out of range");
  }
  in.active.push_back(3 * channels + static_cast<int>(action_count) + agent_id);
  return in;
}

AgentNetParams AgentNetParams::init(int input_dim, std::uint64_t actions,
                                    Rng& rng, int dense_width, int hidden,
                                    double head_scale) {
  if (input_dim < 1 || actions < 1 || dense_width < 1 || hidden < 1) {
    throw ConfigError("agent network dimensions must be positive");
  }
  AgentNetParams p;
  const auto din = static_cast<std::size_t>(input_dim);
  const auto dw = static_cast<std::size_t>(dense_width);
  const auto dh = static_cast<std::size_t>(hidden);
  p.input_embed = ParamTensor::uniform({din, dw}, din, rng);
  p.input_bias = ParamTensor::zeros({dw});
  p.gru = ndmath::GruParams::init(dw, dh, rng);
  p.head_weight = ParamTensor::uniform({actions, dh}, dh, rng);
  if (head_scale != 1.0) {
    for (double& v : p.head_weight.values) v *= head_scale;
  }
  p.head_bias = ParamTensor::zeros({actions});
  return p;
}

AgentNetParams AgentNetParams::zeros_like(const AgentNetParams& other) {
  AgentNetParams p;
  p.input_embed = ParamTensor::zeros(other.input_embed.shape);
  p.input_bias = ParamTensor::zeros(other.input_bias.shape);
  p.gru = ndmath::GruParams::zeros(other.dense_width(), other.hidden());
  p.head_weight = ParamTensor::zeros(other.head_weight.shape);
  p.head_bias = ParamTensor::zeros(other.head_bias.shape);
  return p;
}

void agent_q_forward(const AgentNetParams& params, const AgentInput& input,
                     std::span<const double> hidden,
                     std::span<double> hidden_next, std::span<double> q_out) {
  if (input.dim != params.input_dim()) {
    throw ConfigError("agent_q_forward: input dimension mismatch");
  }
  std::vector<double> trunk(params.dense_width());
  ndmath::embed_sum_forward(input.active, params.input_embed,
                            params.input_bias, trunk);
  ndmath::apply_activation(Act::Relu, trunk);
  ndmath::gru_forward(params.gru, trunk, hidden, hidden_next);
  ndmath::dense_forward(hidden_next, params.head_weight, params.head_bias,
                        q_out);
}

AgentNetIds AgentNetIds::bind(Tape& tape, AgentNetParams& p) {
  AgentNetIds ids;
  ids.input_embed = tape.param(p.input_embed);
  ids.input_bias = tape.param(p.input_bias);
  ids.gru = tape.bind_gru(p.gru);
  ids.head_weight = tape.param(p.head_weight);
  ids.head_bias = tape.param(p.head_bias);
  return ids;
}

Tape::NodeId agent_trunk_taped(Tape& tape, const AgentNetIds& ids,
                               const AgentInput& input, Tape::NodeId hidden) {
  auto x = tape.activation(
      Act::Relu, tape.embed_sum(ids.input_embed, ids.input_bias, input.active));
  return tape.gru(ids.gru, x, hidden);
}

Tape::NodeId agent_q_at_taped(Tape& tape, const AgentNetIds& ids,
                              Tape::NodeId hidden, int action) {
  return tape.dense_row(ids.head_weight, ids.head_bias, hidden, action);
}

Tape::NodeId agent_q_full_taped(Tape& tape, const AgentNetIds& ids,
                                Tape::NodeId hidden) {
  return tape.dense(ids.head_weight, ids.head_bias, hidden);
}

double EpsilonSchedule::at(long step) const {
  if (step < 0) throw UsageError("epsilon: step must be non-negative");
  if (step >= decay_steps) return end;
  const double frac =
      static_cast<double>(step) / static_cast<double>(decay_steps);
  return start + (end - start) * frac;
}

int argmax_lowest(std::span<const double> q) {
  if (q.empty()) throw UsageError("argmax of empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(q.size()); ++i) {
    if (q[i] > q[best]) best = i;
  }
  return best;
}

int select_action(std::span<const double> q, double epsilon, Rng& rng) {
  if (q.empty()) throw UsageError("select_action: empty Q-vector");
  if (rng.uniform01() < epsilon) {
    return rng.uniform_int(static_cast<int>(q.size()));
  }
  return argmax_lowest(q);
}

}  // namespace qmixdsa::agentnet
