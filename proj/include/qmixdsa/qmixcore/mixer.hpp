#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qmixdsa/ndmath/tape.hpp"
#include "qmixdsa/ndmath/tensor.hpp"
#include "qmixdsa/rng.hpp"

namespace qmixdsa::qmixcore {

// State-conditioned monotone mixer. Hypernetwork heads generate, from the
// true channel occupancy, the mixing weights
//   q_tot = w2 . elu(W1^T q + b1) + b2
// with |.| applied to the generated W1 and w2 entries, which keeps
// dq_tot/dq_n >= 0 for every agent. Layer widths: mixing hidden uses ELU,
// hypernetwork hiddens use ReLU.
struct MixerParams {
  // W1 head: state -> ReLU hidden -> embed*agents weights.
  ndmath::ParamTensor w1_hidden, w1_hidden_bias, w1_out, w1_out_bias;
  // b1 head: linear in the state.
  ndmath::ParamTensor b1_out, b1_out_bias;
  // w2 head: state -> ReLU hidden -> embed weights.
  ndmath::ParamTensor w2_hidden, w2_hidden_bias, w2_out, w2_out_bias;
  // b2 head: state -> ReLU hidden -> scalar.
  ndmath::ParamTensor b2_hidden, b2_hidden_bias, b2_out, b2_out_bias;

  static MixerParams init(int state_dim, int agents, Rng& rng, int embed = 32,
                          int hyper_hidden = 32);
  static MixerParams zeros_like(const MixerParams& other);

  int embed() const { return static_cast<int>(b1_out_bias.size()); }
  int agents() const {
    return static_cast<int>(w1_out_bias.size()) / embed();
  }
  int state_dim() const {
    return static_cast<int>(w1_hidden.size() / w1_hidden_bias.size());
  }

  template <class F>
  void for_each(F&& f) {
    f("w1_hidden", w1_hidden); f("w1_hidden_bias", w1_hidden_bias);
    f("w1_out", w1_out); f("w1_out_bias", w1_out_bias);
    f("b1_out", b1_out); f("b1_out_bias", b1_out_bias);
    f("w2_hidden", w2_hidden); f("w2_hidden_bias", w2_hidden_bias);
    f("w2_out", w2_out); f("w2_out_bias", w2_out_bias);
    f("b2_hidden", b2_hidden); f("b2_hidden_bias", b2_hidden_bias);
    f("b2_out", b2_out); f("b2_out_bias", b2_out_bias);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<MixerParams*>(this)->for_each(
        [&](const char* name, ndmath::ParamTensor& t) {
          f(name, static_cast<const ndmath::ParamTensor&>(t));
        });
  }
};

// Untaped evaluation.
double mix(const MixerParams& params, std::span<const double> agent_qs,
           std::span<const std::uint8_t> state);

struct MixerIds {
  ndmath::Tape::NodeId w1_hidden, w1_hidden_bias, w1_out, w1_out_bias;
  ndmath::Tape::NodeId b1_out, b1_out_bias;
  ndmath::Tape::NodeId w2_hidden, w2_hidden_bias, w2_out, w2_out_bias;
  ndmath::Tape::NodeId b2_hidden, b2_hidden_bias, b2_out, b2_out_bias;

  static MixerIds bind(ndmath::Tape& tape, MixerParams& p);
};

// Taped evaluation; agent_qs is a tape node of length agents.
ndmath::Tape::NodeId mix_taped(ndmath::Tape& tape, const MixerIds& ids,
                               ndmath::Tape::NodeId agent_qs,
                               std::span<const std::uint8_t> state, int embed,
                               int agents);

// Componentwise per-agent argmax (lowest-index ties) over per-agent
// Q-vectors.
std::vector<int> greedy_joint_action(
    std::span<const std::vector<double>> per_agent_q);

}  // namespace qmixdsa::qmixcore
