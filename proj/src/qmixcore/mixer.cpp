#include "qmixdsa/qmixcore/mixer.hpp"

#include <cmath>

#include "qmixdsa/agentnet/drqn.hpp"
#include "qmixdsa/error.hpp"

namespace qmixdsa::qmixcore {

using ndmath::Act;
using ndmath::ParamTensor;
using ndmath::Tape;

MixerParams MixerParams::init(int state_dim, int agents, Rng& rng, int embed,
                              int hyper_hidden) {
  if (state_dim < 1 || agents < 1 || embed < 1 || hyper_hidden < 1) {
    throw ConfigError("mixer dimensions must be positive");
  }
  const auto sd = static_cast<std::size_t>(state_dim);
  const auto na = static_cast<std::size_t>(agents);
  const auto em = static_cast<std::size_t>(embed);
  const auto hh = static_cast<std::size_t>(hyper_hidden);

  MixerParams p;
  p.w1_hidden = ParamTensor::uniform({hh, sd}, sd, rng);
  p.w1_hidden_bias = ParamTensor::zeros({hh});
  p.w1_out = ParamTensor::uniform({em * na, hh}, hh, rng);
  p.w1_out_bias = ParamTensor::zeros({em * na});
  p.b1_out = ParamTensor::uniform({em, sd}, sd, rng);
  p.b1_out_bias = ParamTensor::zeros({em});
  p.w2_hidden = ParamTensor::uniform({hh, sd}, sd, rng);
  p.w2_hidden_bias = ParamTensor::zeros({hh});
  p.w2_out = ParamTensor::uniform({em, hh}, hh, rng);
  p.w2_out_bias = ParamTensor::zeros({em});
  p.b2_hidden = ParamTensor::uniform({hh, sd}, sd, rng);
  p.b2_hidden_bias = ParamTensor::zeros({hh});
  p.b2_out = ParamTensor::uniform({1, hh}, hh, rng);
  p.b2_out_bias = ParamTensor::zeros({1});
  return p;
}

MixerParams MixerParams::zeros_like(const MixerParams& other) {
  MixerParams p;
  const MixerParams& o = other;
  p.w1_hidden = ParamTensor::zeros(o.w1_hidden.shape);
  p.w1_hidden_bias = ParamTensor::zeros(o.w1_hidden_bias.shape);
  p.w1_out = ParamTensor::zeros(o.w1_out.shape);
  p.w1_out_bias = ParamTensor::zeros(o.w1_out_bias.shape);
  p.b1_out = ParamTensor::zeros(o.b1_out.shape);
  p.b1_out_bias = ParamTensor::zeros(o.b1_out_bias.shape);
  p.w2_hidden = ParamTensor::zeros(o.w2_hidden.shape);
  p.w2_hidden_bias = ParamTensor::zeros(o.w2_hidden_bias.shape);
  p.w2_out = ParamTensor::zeros(o.w2_out.shape);
  p.w2_out_bias = ParamTensor::zeros(o.w2_out_bias.shape);
  p.b2_hidden = ParamTensor::zeros(o.b2_hidden.shape);
  p.b2_hidden_bias = ParamTensor::zeros(o.b2_hidden_bias.shape);
  p.b2_out = ParamTensor::zeros(o.b2_out.shape);
  p.b2_out_bias = ParamTensor::zeros(o.b2_out_bias.shape);
  return p;
}

namespace {

std::vector<double> state_doubles(std::span<const std::uint8_t> state) {
  std::vector<double> s(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) s[i] = state[i];
  return s;
}

}  // namespace

double mix(const MixerParams& params, std::span<const double> agent_qs,
           std::span<const std::uint8_t> state) {
  const int embed = params.embed();
  const int agents = params.agents();
  if (static_cast<int>(agent_qs.size()) != agents) {
    throw ConfigError("mix: agent count mismatch");
  }
  if (static_cast<int>(state.size()) != params.state_dim()) {
    throw ConfigError("mix: state dimension mismatch");
  }
  const auto s = state_doubles(state);
  const std::size_t hh = params.w1_hidden_bias.size();

  // W1 head.
  std::vector<double> h1(hh);
  ndmath::dense_forward(s, params.w1_hidden, params.w1_hidden_bias, h1);
  ndmath::apply_activation(Act::Relu, h1);
  std::vector<double> w1(static_cast<std::size_t>(embed) * agents);
  ndmath::dense_forward(h1, params.w1_out, params.w1_out_bias, w1);
  for (double& v : w1) v = std::fabs(v);

  // b1 head (linear).
  std::vector<double> b1(embed);
  ndmath::dense_forward(s, params.b1_out, params.b1_out_bias, b1);

  // Mixing hidden layer.
  std::vector<double> hidden(embed);
  for (int i = 0; i < embed; ++i) {
    double acc = b1[i];
    const double* row = w1.data() + static_cast<std::size_t>(i) * agents;
    for (int n = 0; n < agents; ++n) acc += row[n] * agent_qs[n];
    hidden[i] = acc;
  }
  ndmath::apply_activation(Act::Elu, hidden);

  // w2 head.
  std::vector<double> h2(hh);
  ndmath::dense_forward(s, params.w2_hidden, params.w2_hidden_bias, h2);
  ndmath::apply_activation(Act::Relu, h2);
  std::vector<double> w2(embed);
  ndmath::dense_forward(h2, params.w2_out, params.w2_out_bias, w2);
  for (double& v : w2) v = std::fabs(v);

  // b2 head.
  std::vector<double> hv(hh);
  ndmath::dense_forward(s, params.b2_hidden, params.b2_hidden_bias, hv);
  ndmath::apply_activation(Act::Relu, hv);
  std::vector<double> b2(1);
  ndmath::dense_forward(hv, params.b2_out, params.b2_out_bias, b2);

  double q_tot = b2[0];
  for (int i = 0; i < embed; ++i) q_tot += w2[i] * hidden[i];
  return q_tot;
}

MixerIds MixerIds::bind(Tape& tape, MixerParams& p) {
  MixerIds ids;
  ids.w1_hidden = tape.param(p.w1_hidden);
  ids.w1_hidden_bias = tape.param(p.w1_hidden_bias);
  ids.w1_out = tape.param(p.w1_out);
  ids.w1_out_bias = tape.param(p.w1_out_bias);
  ids.b1_out = tape.param(p.b1_out);
  ids.b1_out_bias = tape.param(p.b1_out_bias);
  ids.w2_hidden = tape.param(p.w2_hidden);
  ids.w2_hidden_bias = tape.param(p.w2_hidden_bias);
  ids.w2_out = tape.param(p.w2_out);
  ids.w2_out_bias = tape.param(p.w2_out_bias);
  ids.b2_hidden = tape.param(p.b2_hidden);
  ids.b2_hidden_bias = tape.param(p.b2_hidden_bias);
  ids.b2_out = tape.param(p.b2_out);
  ids.b2_out_bias = tape.param(p.b2_out_bias);
  return ids;
}

Tape::NodeId mix_taped(Tape& tape, const MixerIds& ids,
                       Tape::NodeId agent_qs,
                       std::span<const std::uint8_t> state, int embed,
                       int agents) {
  auto s = tape.constant(state_doubles(state));
  auto h1 = tape.activation(Act::Relu,
                            tape.dense(ids.w1_hidden, ids.w1_hidden_bias, s));
  auto w1 = tape.abs(tape.dense(ids.w1_out, ids.w1_out_bias, h1));
  auto b1 = tape.dense(ids.b1_out, ids.b1_out_bias, s);
  auto hidden = tape.activation(
      Act::Elu,
      tape.add(tape.linear_from(w1, Tape::kNone, agent_qs, embed, agents), b1));
  auto h2 = tape.activation(Act::Relu,
                            tape.dense(ids.w2_hidden, ids.w2_hidden_bias, s));
  auto w2 = tape.abs(tape.dense(ids.w2_out, ids.w2_out_bias, h2));
  auto hv = tape.activation(Act::Relu,
                            tape.dense(ids.b2_hidden, ids.b2_hidden_bias, s));
  auto b2 = tape.dense(ids.b2_out, ids.b2_out_bias, hv);
  return tape.add(tape.linear_from(w2, Tape::kNone, hidden, 1, embed), b2);
}

std::vector<int> greedy_joint_action(
    std::span<const std::vector<double>> per_agent_q) {
  std::vector<int> joint;
  joint.reserve(per_agent_q.size());
  for (const auto& q : per_agent_q) {
    joint.push_back(agentnet::argmax_lowest(q));
  }
  return joint;
}

}  // namespace qmixdsa::qmixcore
