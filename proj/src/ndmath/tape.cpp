#include "qmixdsa/ndmath/tape.hpp"

#include <cmath>
#include <string>

#include "qmixdsa/error.hpp"

namespace qmixdsa::ndmath {

Act activation_from_name(std::string_view name) {
  if (name == "relu") return Act::Relu;
  if (name == "elu") return Act::Elu;
  if (name == "sigmoid") return Act::Sigmoid;
  if (name == "tanh") return Act::Tanh;
  throw ConfigError("unknown activation kind: " + std::string(name));
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double activate_one(Act kind, double x) {
  switch (kind) {
    case Act::Relu: return x > 0.0 ? x : 0.0;
    case Act::Elu: return x >= 0.0 ? x : std::expm1(x);
    case Act::Sigmoid: return sigmoid(x);
    case Act::Tanh: return std::tanh(x);
  }
  return x;
}

// Derivative of the activation expressed through its output value.
inline double activate_grad_from_out(Act kind, double y) {
  switch (kind) {
    case Act::Relu: return y > 0.0 ? 1.0 : 0.0;
    case Act::Elu: return y >= 0.0 ? 1.0 : y + 1.0;
    case Act::Sigmoid: return y * (1.0 - y);
    case Act::Tanh: return 1.0 - y * y;
  }
  return 1.0;
}

}  // namespace

void apply_activation(Act kind, std::span<double> x) {
  for (double& v : x) v = activate_one(kind, v);
}

GruParams GruParams::init(std::size_t in_dim, std::size_t hidden, Rng& rng) {
  GruParams p;
  p.wz = ParamTensor::uniform({hidden, in_dim}, in_dim, rng);
  p.uz = ParamTensor::uniform({hidden, hidden}, hidden, rng);
  p.bz = ParamTensor::zeros({hidden});
  p.wr = ParamTensor::uniform({hidden, in_dim}, in_dim, rng);
  p.ur = ParamTensor::uniform({hidden, hidden}, hidden, rng);
  p.br = ParamTensor::zeros({hidden});
  p.wh = ParamTensor::uniform({hidden, in_dim}, in_dim, rng);
  p.uh = ParamTensor::uniform({hidden, hidden}, hidden, rng);
  p.bh = ParamTensor::zeros({hidden});
  return p;
}

GruParams GruParams::zeros(std::size_t in_dim, std::size_t hidden) {
  GruParams p;
  p.wz = ParamTensor::zeros({hidden, in_dim});
  p.uz = ParamTensor::zeros({hidden, hidden});
  p.bz = ParamTensor::zeros({hidden});
  p.wr = ParamTensor::zeros({hidden, in_dim});
  p.ur = ParamTensor::zeros({hidden, hidden});
  p.br = ParamTensor::zeros({hidden});
  p.wh = ParamTensor::zeros({hidden, in_dim});
  p.uh = ParamTensor::zeros({hidden, hidden});
  p.bh = ParamTensor::zeros({hidden});
  return p;
}

void dense_forward(std::span<const double> x, const ParamTensor& w,
                   const ParamTensor& b, std::span<double> y) {
  const std::size_t cols = x.size();
  const std::size_t rows = y.size();
  if (w.size() != rows * cols || b.size() != rows) {
    throw ConfigError("dense_forward: dimension mismatch");
  }
  const double* wp = w.values.data();
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = b.values[i];
    const double* row = wp + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void embed_sum_forward(std::span<const int> active, const ParamTensor& e,
                       const ParamTensor& b, std::span<double> y) {
  const std::size_t out = y.size();
  if (b.size() != out || e.size() % out != 0) {
    throw ConfigError("embed_sum_forward: dimension mismatch");
  }
  const std::size_t in_dim = e.size() / out;
  for (std::size_t i = 0; i < out; ++i) y[i] = b.values[i];
  for (int j : active) {
    if (j < 0 || static_cast<std::size_t>(j) >= in_dim) {
      throw UsageError("embed_sum_forward: active index out of range");
    }
    const double* row = e.values.data() + static_cast<std::size_t>(j) * out;
    for (std::size_t i = 0; i < out; ++i) y[i] += row[i];
  }
}

void gru_forward(const GruParams& p, std::span<const double> x,
                 std::span<const double> h, std::span<double> h_next) {
  const std::size_t d = h.size();
  if (h_next.size() != d || p.bz.size() != d) {
    throw ConfigError("gru_forward: dimension mismatch");
  }
  std::vector<double> z(d), r(d), g(d), rh(d);
  dense_forward(x, p.wz, p.bz, z);
  dense_forward(x, p.wr, p.br, r);
  for (std::size_t i = 0; i < d; ++i) {
    double acc_z = z[i], acc_r = r[i];
    const double* uz = p.uz.values.data() + i * d;
    const double* ur = p.ur.values.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      acc_z += uz[j] * h[j];
      acc_r += ur[j] * h[j];
    }
    z[i] = sigmoid(acc_z);
    r[i] = sigmoid(acc_r);
    rh[i] = r[i] * h[i];
  }
  dense_forward(x, p.wh, p.bh, g);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = g[i];
    const double* uh = p.uh.values.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) acc += uh[j] * rh[j];
    g[i] = std::tanh(acc);
    h_next[i] = (1.0 - z[i]) * h[i] + z[i] * g[i];
  }
}

// ---- Tape ----

Tape::NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

std::span<const double> Tape::val_of(NodeId id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.vptr != nullptr) return {n.vptr, n.vlen};
  return {n.val.data(), n.val.size()};
}

std::span<const double> Tape::value(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw UsageError("Tape::value: invalid node id");
  }
  return val_of(id);
}

std::vector<double>& Tape::grad_of(NodeId id) {
  auto& g = grads_[static_cast<std::size_t>(id)];
  if (g.empty()) g.assign(val_of(id).size(), 0.0);
  return g;
}

Tape::NodeId Tape::constant(std::vector<double> v) {
  Node n;
  n.op = Op::Constant;
  n.val = std::move(v);
  return push(std::move(n));
}

Tape::NodeId Tape::zeros(std::size_t len) {
  return constant(std::vector<double>(len, 0.0));
}

Tape::NodeId Tape::param(ParamTensor& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return it->second;
  Node n;
  n.op = Op::Param;
  n.vptr = p.values.data();
  n.vlen = p.size();
  n.tensor = &p;
  NodeId id = push(std::move(n));
  param_nodes_.emplace(&p, id);
  return id;
}

Tape::GruIds Tape::bind_gru(GruParams& p) {
  return GruIds{param(p.wz), param(p.uz), param(p.bz),
                param(p.wr), param(p.ur), param(p.br),
                param(p.wh), param(p.uh), param(p.bh)};
}

Tape::NodeId Tape::dense(NodeId w, NodeId b, NodeId x) {
  const auto wv = val_of(w);
  const auto xv = val_of(x);
  const std::size_t cols = xv.size();
  if (cols == 0 || wv.size() % cols != 0) {
    throw ConfigError("Tape::dense: dimension mismatch");
  }
  const std::size_t rows = wv.size() / cols;
  const auto bv = val_of(b);
  if (bv.size() != rows) throw ConfigError("Tape::dense: bias mismatch");
  Node n;
  n.op = Op::Dense;
  n.in = {w, b, x};
  n.nin = 3;
  n.rows = static_cast<int>(rows);
  n.cols = static_cast<int>(cols);
  n.val.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = bv[i];
    const double* row = wv.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * xv[j];
    n.val[i] = acc;
  }
  return push(std::move(n));
}

Tape::NodeId Tape::embed_sum(NodeId e, NodeId b, std::vector<int> active) {
  const auto ev = val_of(e);
  const auto bv = val_of(b);
  const std::size_t out = bv.size();
  if (out == 0 || ev.size() % out != 0) {
    throw ConfigError("Tape::embed_sum: dimension mismatch");
  }
  const std::size_t in_dim = ev.size() / out;
  Node n;
  n.op = Op::EmbedSum;
  n.in = {e, b};
  n.nin = 2;
  n.rows = static_cast<int>(out);
  n.val.assign(bv.begin(), bv.end());
  for (int j : active) {
    if (j < 0 || static_cast<std::size_t>(j) >= in_dim) {
      throw UsageError("Tape::embed_sum: active index out of range");
    }
    const double* row = ev.data() + static_cast<std::size_t>(j) * out;
    for (std::size_t i = 0; i < out; ++i) n.val[i] += row[i];
  }
  n.idx = std::move(active);
  return push(std::move(n));
}

Tape::NodeId Tape::dense_row(NodeId w, NodeId b, NodeId x, int row) {
  const auto wv = val_of(w);
  const auto xv = val_of(x);
  const auto bv = val_of(b);
  const std::size_t cols = xv.size();
  if (cols == 0 || wv.size() % cols != 0) {
    throw ConfigError("Tape::dense_row: dimension mismatch");
  }
  const std::size_t rows = wv.size() / cols;
  if (bv.size() != rows || row < 0 || static_cast<std::size_t>(row) >= rows) {
    throw UsageError("Tape::dense_row: row out of range");
  }
  Node n;
  n.op = Op::DenseRow;
  n.in = {w, b, x};
  n.nin = 3;
  n.rows = static_cast<int>(rows);
  n.cols = static_cast<int>(cols);
  n.row = row;
  double acc = bv[static_cast<std::size_t>(row)];
  const double* wr = wv.data() + static_cast<std::size_t>(row) * cols;
  for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * xv[j];
  n.val = {acc};
  return push(std::move(n));
}

Tape::NodeId Tape::gru(const GruIds& p, NodeId x, NodeId h) {
  const auto xv = val_of(x);
  const auto hv = val_of(h);
  const std::size_t d = hv.size();
  const auto bz = val_of(p.bz);
  if (bz.size() != d || val_of(p.wz).size() != d * xv.size() ||
      val_of(p.uz).size() != d * d) {
    throw ConfigError("Tape::gru: dimension mismatch");
  }
  Node n;
  n.op = Op::Gru;
  n.in = {p.wz, p.uz, p.bz, p.wr, p.ur, p.br, p.wh, p.uh, p.bh, x, h};
  n.nin = 11;
  n.cols = static_cast<int>(xv.size());
  n.rows = static_cast<int>(d);
  n.aux.resize(4 * d);
  std::span<double> z(n.aux.data(), d);
  std::span<double> r(n.aux.data() + d, d);
  std::span<double> g(n.aux.data() + 2 * d, d);
  std::span<double> rh(n.aux.data() + 3 * d, d);

  const auto wz = val_of(p.wz), uz = val_of(p.uz), bz2 = val_of(p.bz);
  const auto wr = val_of(p.wr), ur = val_of(p.ur), br = val_of(p.br);
  const auto wh = val_of(p.wh), uh = val_of(p.uh), bh = val_of(p.bh);
  const std::size_t din = xv.size();
  for (std::size_t i = 0; i < d; ++i) {
    double az = bz2[i], ar = br[i];
    const double* wzr = wz.data() + i * din;
    const double* wrr = wr.data() + i * din;
    for (std::size_t j = 0; j < din; ++j) {
      az += wzr[j] * xv[j];
      ar += wrr[j] * xv[j];
    }
    const double* uzr = uz.data() + i * d;
    const double* urr = ur.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      az += uzr[j] * hv[j];
      ar += urr[j] * hv[j];
    }
    z[i] = sigmoid(az);
    r[i] = sigmoid(ar);
    rh[i] = r[i] * hv[i];
  }
  n.val.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    double ag = bh[i];
    const double* whr = wh.data() + i * din;
    for (std::size_t j = 0; j < din; ++j) ag += whr[j] * xv[j];
    const double* uhr = uh.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) ag += uhr[j] * rh[j];
    g[i] = std::tanh(ag);
    n.val[i] = (1.0 - z[i]) * hv[i] + z[i] * g[i];
  }
  return push(std::move(n));
}

Tape::NodeId Tape::activation(Act kind, NodeId x) {
  Node n;
  n.op = Op::Activation;
  n.in = {x};
  n.nin = 1;
  n.act = kind;
  const auto xv = val_of(x);
  n.val.resize(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) n.val[i] = activate_one(kind, xv[i]);
  return push(std::move(n));
}

Tape::NodeId Tape::abs(NodeId x) {
  Node n;
  n.op = Op::Abs;
  n.in = {x};
  n.nin = 1;
  const auto xv = val_of(x);
  n.val.resize(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) n.val[i] = std::fabs(xv[i]);
  return push(std::move(n));
}

Tape::NodeId Tape::linear_from(NodeId w, NodeId b, NodeId x, int rows,
                               int cols) {
  const auto wv = val_of(w);
  const auto xv = val_of(x);
  const std::size_t r = static_cast<std::size_t>(rows);
  const std::size_t c = static_cast<std::size_t>(cols);
  if (wv.size() != r * c || xv.size() != c) {
    throw ConfigError("Tape::linear_from: dimension mismatch");
  }
  Node n;
  n.op = Op::LinearFrom;
  n.in = {w, b, x};
  n.nin = 3;
  n.rows = rows;
  n.cols = cols;
  n.val.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    const double* row = wv.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) acc += row[j] * xv[j];
    n.val[i] = acc;
  }
  if (b != kNone) {
    const auto bv = val_of(b);
    if (bv.size() != r) throw ConfigError("Tape::linear_from: bias mismatch");
    for (std::size_t i = 0; i < r; ++i) n.val[i] += bv[i];
  }
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const auto av = val_of(a);
  const auto bv = val_of(b);
  if (av.size() != bv.size()) throw ConfigError("Tape::add: length mismatch");
  Node n;
  n.op = Op::Add;
  n.in = {a, b};
  n.nin = 2;
  n.val.resize(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) n.val[i] = av[i] + bv[i];
  return push(std::move(n));
}

Tape::NodeId Tape::concat(std::span<const NodeId> parts) {
  Node n;
  n.op = Op::Concat;
  n.idx.reserve(parts.size());
  for (NodeId id : parts) {
    const auto v = val_of(id);
    n.val.insert(n.val.end(), v.begin(), v.end());
    n.idx.push_back(id);
  }
  return push(std::move(n));
}

Tape::NodeId Tape::sum(NodeId x) {
  Node n;
  n.op = Op::Sum;
  n.in = {x};
  n.nin = 1;
  double acc = 0.0;
  for (double v : val_of(x)) acc += v;
  n.val = {acc};
  return push(std::move(n));
}

Tape::NodeId Tape::sq_diff(NodeId x, double target) {
  const auto xv = val_of(x);
  if (xv.size() != 1) throw UsageError("Tape::sq_diff: input must be scalar");
  Node n;
  n.op = Op::SqDiff;
  n.in = {x};
  n.nin = 1;
  n.c0 = target;
  const double d = xv[0] - target;
  n.val = {d * d};
  return push(std::move(n));
}

Tape::NodeId Tape::sum_scaled(std::span<const NodeId> scalars, double scale) {
  Node n;
  n.op = Op::SumScaled;
  n.c0 = scale;
  double acc = 0.0;
  n.idx.reserve(scalars.size());
  for (NodeId id : scalars) {
    const auto v = val_of(id);
    if (v.size() != 1) throw UsageError("Tape::sum_scaled: inputs must be scalar");
    acc += v[0];
    n.idx.push_back(id);
  }
  n.val = {acc * scale};
  return push(std::move(n));
}

void Tape::backward_node(NodeId id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const auto& gy = grads_[static_cast<std::size_t>(id)];
  switch (n.op) {
    case Op::Constant:
    case Op::Param:
      return;
    case Op::Dense: {
      const std::size_t rows = static_cast<std::size_t>(n.rows);
      const std::size_t cols = static_cast<std::size_t>(n.cols);
      const auto xv = val_of(n.in[2]);
      const auto wv = val_of(n.in[0]);
      auto& gw = grad_of(n.in[0]);
      auto& gb = grad_of(n.in[1]);
      auto& gx = grad_of(n.in[2]);
      for (std::size_t i = 0; i < rows; ++i) {
        const double g = gy[i];
        if (g == 0.0) continue;
        gb[i] += g;
        double* gwr = gw.data() + i * cols;
        const double* wr = wv.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
          gwr[j] += g * xv[j];
          gx[j] += g * wr[j];
        }
      }
      return;
    }
    case Op::EmbedSum: {
      const std::size_t out = static_cast<std::size_t>(n.rows);
      auto& ge = grad_of(n.in[0]);
      auto& gb = grad_of(n.in[1]);
      for (std::size_t i = 0; i < out; ++i) gb[i] += gy[i];
      for (int j : n.idx) {
        double* row = ge.data() + static_cast<std::size_t>(j) * out;
        for (std::size_t i = 0; i < out; ++i) row[i] += gy[i];
      }
      return;
    }
    case Op::DenseRow: {
      const std::size_t cols = static_cast<std::size_t>(n.cols);
      const std::size_t row = static_cast<std::size_t>(n.row);
      const double g = gy[0];
      if (g == 0.0) return;
      const auto xv = val_of(n.in[2]);
      const auto wv = val_of(n.in[0]);
      auto& gw = grad_of(n.in[0]);
      auto& gb = grad_of(n.in[1]);
      auto& gx = grad_of(n.in[2]);
      gb[row] += g;
      double* gwr = gw.data() + row * cols;
      const double* wr = wv.data() + row * cols;
      for (std::size_t j = 0; j < cols; ++j) {
        gwr[j] += g * xv[j];
        gx[j] += g * wr[j];
      }
      return;
    }
    case Op::Gru: {
      const std::size_t d = static_cast<std::size_t>(n.rows);
      const std::size_t din = static_cast<std::size_t>(n.cols);
      const double* z = n.aux.data();
      const double* r = n.aux.data() + d;
      const double* g = n.aux.data() + 2 * d;
      const double* rh = n.aux.data() + 3 * d;
      const auto xv = val_of(n.in[9]);
      const auto hv = val_of(n.in[10]);
      const auto uz = val_of(n.in[1]);
      const auto ur = val_of(n.in[4]);
      const auto uh = val_of(n.in[7]);
      const auto wz = val_of(n.in[0]);
      const auto wr = val_of(n.in[3]);
      const auto wh = val_of(n.in[6]);

      std::vector<double> dag(d), daz(d), dar(d), drh(d, 0.0);
      for (std::size_t i = 0; i < d; ++i) {
        const double dh_out = gy[i];
        const double dg = dh_out * z[i];
        const double dz = dh_out * (g[i] - hv[i]);
        dag[i] = dg * (1.0 - g[i] * g[i]);
        daz[i] = dz * z[i] * (1.0 - z[i]);
      }
      // d(r*h) = Uh^T dag
      for (std::size_t i = 0; i < d; ++i) {
        const double a = dag[i];
        if (a == 0.0) continue;
        const double* uhr = uh.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) drh[j] += a * uhr[j];
      }
      for (std::size_t i = 0; i < d; ++i) {
        const double dr = drh[i] * hv[i];
        dar[i] = dr * r[i] * (1.0 - r[i]);
      }

      auto& gwz = grad_of(n.in[0]);
      auto& guz = grad_of(n.in[1]);
      auto& gbz = grad_of(n.in[2]);
      auto& gwr = grad_of(n.in[3]);
      auto& gur = grad_of(n.in[4]);
      auto& gbr = grad_of(n.in[5]);
      auto& gwh = grad_of(n.in[6]);
      auto& guh = grad_of(n.in[7]);
      auto& gbh = grad_of(n.in[8]);
      auto& gx = grad_of(n.in[9]);
      auto& gh = grad_of(n.in[10]);

      for (std::size_t i = 0; i < d; ++i) {
        // direct path and the r*h product path into h
        gh[i] += gy[i] * (1.0 - z[i]) + drh[i] * r[i];
      }
      for (std::size_t i = 0; i < d; ++i) {
        const double az = daz[i], ar = dar[i], ah = dag[i];
        gbz[i] += az;
        gbr[i] += ar;
        gbh[i] += ah;
        double* gwzr = gwz.data() + i * din;
        double* gwrr = gwr.data() + i * din;
        double* gwhr = gwh.data() + i * din;
        const double* wzr = wz.data() + i * din;
        const double* wrr = wr.data() + i * din;
        const double* whr = wh.data() + i * din;
        for (std::size_t j = 0; j < din; ++j) {
          gwzr[j] += az * xv[j];
          gwrr[j] += ar * xv[j];
          gwhr[j] += ah * xv[j];
          gx[j] += az * wzr[j] + ar * wrr[j] + ah * whr[j];
        }
        double* guzr = guz.data() + i * d;
        double* gurr = gur.data() + i * d;
        double* guhr = guh.data() + i * d;
        const double* uzr = uz.data() + i * d;
        const double* urr = ur.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
          guzr[j] += az * hv[j];
          gurr[j] += ar * hv[j];
          guhr[j] += ah * rh[j];
          gh[j] += az * uzr[j] + ar * urr[j];
        }
      }
      return;
    }
    case Op::Activation: {
      auto& gx = grad_of(n.in[0]);
      for (std::size_t i = 0; i < n.val.size(); ++i) {
        gx[i] += gy[i] * activate_grad_from_out(n.act, n.val[i]);
      }
      return;
    }
    case Op::Abs: {
      const auto xv = val_of(n.in[0]);
      auto& gx = grad_of(n.in[0]);
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const double s = xv[i] > 0.0 ? 1.0 : (xv[i] < 0.0 ? -1.0 : 0.0);
        gx[i] += gy[i] * s;
      }
      return;
    }
    case Op::LinearFrom: {
      const std::size_t rows = static_cast<std::size_t>(n.rows);
      const std::size_t cols = static_cast<std::size_t>(n.cols);
      const auto xv = val_of(n.in[2]);
      const auto wv = val_of(n.in[0]);
      auto& gw = grad_of(n.in[0]);
      auto& gx = grad_of(n.in[2]);
      for (std::size_t i = 0; i < rows; ++i) {
        const double g = gy[i];
        if (g == 0.0) continue;
        double* gwr = gw.data() + i * cols;
        const double* wr = wv.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) {
          gwr[j] += g * xv[j];
          gx[j] += g * wr[j];
        }
      }
      if (n.in[1] != kNone) {
        auto& gb = grad_of(n.in[1]);
        for (std::size_t i = 0; i < rows; ++i) gb[i] += gy[i];
      }
      return;
    }
    case Op::Add: {
      auto& ga = grad_of(n.in[0]);
      for (std::size_t i = 0; i < n.val.size(); ++i) ga[i] += gy[i];
      auto& gb = grad_of(n.in[1]);
      for (std::size_t i = 0; i < n.val.size(); ++i) gb[i] += gy[i];
      return;
    }
    case Op::Concat: {
      std::size_t off = 0;
      for (int part : n.idx) {
        auto& gp = grad_of(part);
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy[off + i];
        off += gp.size();
      }
      return;
    }
    case Op::Sum: {
      auto& gx = grad_of(n.in[0]);
      for (double& v : gx) v += gy[0];
      return;
    }
    case Op::SqDiff: {
      const auto xv = val_of(n.in[0]);
      grad_of(n.in[0])[0] += gy[0] * 2.0 * (xv[0] - n.c0);
      return;
    }
    case Op::SumScaled: {
      const double g = gy[0] * n.c0;
      for (int part : n.idx) grad_of(part)[0] += g;
      return;
    }
  }
}

void Tape::backward(NodeId loss) {
  if (nodes_.empty()) throw UsageError("Tape::backward: empty tape");
  if (replayed_) throw UsageError("Tape::backward: tape already replayed");
  if (loss < 0 || static_cast<std::size_t>(loss) >= nodes_.size()) {
    throw UsageError("Tape::backward: invalid loss node");
  }
  const auto lv = val_of(loss);
  if (lv.size() != 1) throw UsageError("Tape::backward: loss must be scalar");
  if (!std::isfinite(lv[0])) {
    throw NumericError("Tape::backward: non-finite loss");
  }
  replayed_ = true;
  grads_.assign(nodes_.size(), {});
  grads_[static_cast<std::size_t>(loss)] = {1.0};
  for (NodeId id = loss; id >= 0; --id) {
    if (grads_[static_cast<std::size_t>(id)].empty()) continue;
    backward_node(id);
  }
  for (const auto& [tensor, node] : param_nodes_) {
    const auto& g = grads_[static_cast<std::size_t>(node)];
    if (g.empty()) continue;
    ParamTensor* t = const_cast<ParamTensor*>(tensor);
    for (std::size_t i = 0; i < g.size(); ++i) t->grad[i] += g[i];
  }
}

}  // namespace qmixdsa::ndmath
