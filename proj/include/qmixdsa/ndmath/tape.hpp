#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qmixdsa/ndmath/tensor.hpp"

namespace qmixdsa::ndmath {

enum class Act { Relu, Elu, Sigmoid, Tanh };

Act activation_from_name(std::string_view name);

// Elementwise activation, in place (untaped path).
void apply_activation(Act kind, std::span<double> x);

// Gated recurrent unit parameters. Convention:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   g = tanh(Wh x + Uh (r*h) + bh)
//   h' = (1 - z) * h + z * g
struct GruParams {
  ParamTensor wz, uz, bz, wr, ur, br, wh, uh, bh;

  static GruParams init(std::size_t in_dim, std::size_t hidden, Rng& rng);
  static GruParams zeros(std::size_t in_dim, std::size_t hidden);

  std::size_t hidden() const { return bz.size(); }

  template <class F>
  void for_each(F&& f) {
    f("wz", wz); f("uz", uz); f("bz", bz);
    f("wr", wr); f("ur", ur); f("br", br);
    f("wh", wh); f("uh", uh); f("bh", bh);
  }
  template <class F>
  void for_each(F&& f) const {
    f("wz", wz); f("uz", uz); f("bz", bz);
    f("wr", wr); f("ur", ur); f("br", br);
    f("wh", wh); f("uh", uh); f("bh", bh);
  }
};

// ---- Untaped kernels (acting and target-network evaluation) ----

// y = W x + b with W row-major [out x in].
void dense_forward(std::span<const double> x, const ParamTensor& w,
                   const ParamTensor& b, std::span<double> y);

// y = b + sum of rows e[j] for j in active; e is [in x out] (row = embedding
// of one active input column). Equivalent to a dense layer over a sparse
// binary input vector.
void embed_sum_forward(std::span<const int> active, const ParamTensor& e,
                       const ParamTensor& b, std::span<double> y);

void gru_forward(const GruParams& p, std::span<const double> x,
                 std::span<const double> h, std::span<double> h_next);

// Reverse-mode tape over a fixed set of layer-level primitives. A forward
// pass records one node per primitive; backward() replays the record in
// reverse exactly once, accumulating into the grad buffers of every
// ParamTensor bound via param().
class Tape {
 public:
  using NodeId = std::int32_t;
  static constexpr NodeId kNone = -1;

  struct GruIds {
    NodeId wz, uz, bz, wr, ur, br, wh, uh, bh;
  };

  NodeId constant(std::vector<double> v);
  NodeId zeros(std::size_t n);
  NodeId param(ParamTensor& p);
  GruIds bind_gru(GruParams& p);

  NodeId dense(NodeId w, NodeId b, NodeId x);
  NodeId embed_sum(NodeId e, NodeId b, std::vector<int> active);
  // Scalar node: w[row] . x + b[row].
  NodeId dense_row(NodeId w, NodeId b, NodeId x, int row);
  NodeId gru(const GruIds& p, NodeId x, NodeId h);
  NodeId activation(Act kind, NodeId x);
  NodeId abs(NodeId x);
  // y = reshape(w, rows x cols) x (+ b); w itself is a tape value, so
  // gradients flow into the generated weights as well as into x.
  NodeId linear_from(NodeId w, NodeId b, NodeId x, int rows, int cols);
  NodeId add(NodeId a, NodeId b);
  NodeId concat(std::span<const NodeId> parts);
  NodeId sum(NodeId x);
  // Scalar node: (x - target)^2.
  NodeId sq_diff(NodeId x, double target);
  // Scalar node: scale * sum of scalar nodes.
  NodeId sum_scaled(std::span<const NodeId> scalars, double scale);

  std::span<const double> value(NodeId id) const;
  std::size_t node_count() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and accumulates parameter gradients. The loss
  // node must be scalar; replaying an empty or already-replayed tape is a
  // usage error.
  void backward(NodeId loss);

 private:
  enum class Op : std::uint8_t {
    Constant, Param, Dense, EmbedSum, DenseRow, Gru, Activation, Abs,
    LinearFrom, Add, Concat, Sum, SqDiff, SumScaled,
  };

  struct Node {
    Op op{};
    std::vector<double> val;       // computed nodes
    const double* vptr = nullptr;  // leaves point at parameter storage
    std::size_t vlen = 0;
    std::array<NodeId, 12> in{};
    int nin = 0;
    std::vector<int> idx;          // embed_sum active set / variadic inputs
    std::vector<double> aux;       // gru stash: z, r, g, r*h
    int rows = 0, cols = 0, row = -1;
    Act act{};
    double c0 = 0.0;
    ParamTensor* tensor = nullptr;
  };

  NodeId push(Node n);
  std::span<const double> val_of(NodeId id) const;
  std::vector<double>& grad_of(NodeId id);
  void backward_node(NodeId id);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::unordered_map<const ParamTensor*, NodeId> param_nodes_;
  bool replayed_ = false;
};

}  // namespace qmixdsa::ndmath
