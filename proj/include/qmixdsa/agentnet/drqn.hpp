#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qmixdsa/ndmath/tape.hpp"
#include "qmixdsa/ndmath/tensor.hpp"
#include "qmixdsa/rng.hpp"

namespace qmixdsa::agentnet {

// Network input for one agent and slot, kept as the list of active positions
// of an all-binary feature vector:
//   [0, 3K)        three-way one-hot per channel (unsensed / busy / idle)
//   [3K, 3K+A)     previous action one-hot (empty at the first slot)
//   [3K+A, 3K+A+N) agent identity one-hot
struct AgentInput {
  std::vector<int> active;
  int dim = 0;

  std::vector<double> to_dense() const;
};

AgentInput encode_input(std::span<const std::int8_t> observation,
                        std::optional<std::uint64_t> last_action, int agent_id,
                        std::uint64_t action_count, int agents);

// DRQN agent: dense(input -> dense_width) + ReLU -> GRU(hidden) ->
// linear head over the action space. The input layer is stored row-per-input
// (embedding layout) because inputs are sparse binary vectors.
struct AgentNetParams {
  ndmath::ParamTensor input_embed;  // [input_dim x dense_width]
  ndmath::ParamTensor input_bias;   // [dense_width]
  ndmath::GruParams gru;
  ndmath::ParamTensor head_weight;  // [actions x hidden]
  ndmath::ParamTensor head_bias;    // [actions]

  static AgentNetParams init(int input_dim, std::uint64_t actions, Rng& rng,
                             int dense_width = 64, int hidden = 64,
                             double head_scale = 1.0);
  static AgentNetParams zeros_like(const AgentNetParams& other);

  int dense_width() const { return static_cast<int>(input_bias.size()); }
  int hidden() const { return static_cast<int>(gru.hidden()); }
  std::uint64_t actions() const { return head_bias.size(); }
  int input_dim() const {
    return static_cast<int>(input_embed.size() / input_bias.size());
  }

  template <class F>
  void for_each(F&& f) {
    f("input_embed", input_embed);
    f("input_bias", input_bias);
    gru.for_each([&](const char* name, ndmath::ParamTensor& t) {
      const std::string full = std::string("gru.") + name;
      f(full.c_str(), t);
    });
    f("head_weight", head_weight);
    f("head_bias", head_bias);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<AgentNetParams*>(this)->for_each(
        [&](const char* name, ndmath::ParamTensor& t) {
          f(name, static_cast<const ndmath::ParamTensor&>(t));
        });
  }
};

// Untaped forward; writes the full Q-vector and the next hidden state.
void agent_q_forward(const AgentNetParams& params, const AgentInput& input,
                     std::span<const double> hidden,
                     std::span<double> hidden_next, std::span<double> q_out);

// Taped forward pieces used by the trainers.
struct AgentNetIds {
  ndmath::Tape::NodeId input_embed, input_bias;
  ndmath::Tape::GruIds gru;
  ndmath::Tape::NodeId head_weight, head_bias;

  static AgentNetIds bind(ndmath::Tape& tape, AgentNetParams& p);
};

// Runs the recurrent trunk for one slot; returns the new hidden-state node.
ndmath::Tape::NodeId agent_trunk_taped(ndmath::Tape& tape,
                                       const AgentNetIds& ids,
                                       const AgentInput& input,
                                       ndmath::Tape::NodeId hidden);

// Scalar node: Q-value of one action.
ndmath::Tape::NodeId agent_q_at_taped(ndmath::Tape& tape,
                                      const AgentNetIds& ids,
                                      ndmath::Tape::NodeId hidden, int action);

// Full Q head as a tape node (used by gradient checks).
ndmath::Tape::NodeId agent_q_full_taped(ndmath::Tape& tape,
                                        const AgentNetIds& ids,
                                        ndmath::Tape::NodeId hidden);

// Linearly decaying exploration rate, clamped at the end value.
struct EpsilonSchedule {
  double start = 0.4;
  double end = 0.05;
  long decay_steps = 10000;

  double at(long step) const;
};

// Epsilon-greedy selection; greedy ties break to the lowest index.
int select_action(std::span<const double> q, double epsilon, Rng& rng);

int argmax_lowest(std::span<const double> q);

}  // namespace qmixdsa::agentnet
