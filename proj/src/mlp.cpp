#include "fbh/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace fbh {

void MLPSpec::validate() const {
  if (input_dim < 1 || output_dim < 1)
    throw std::invalid_argument("MLPSpec: input/output dims must be positive");
  if (hidden.empty()) throw std::invalid_argument("MLPSpec: hidden layer list is empty");
  for (int w : hidden)
    if (w < 1) throw std::invalid_argument("MLPSpec: hidden widths must be positive");
}

long param_count(const MLPSpec& spec) {
  long n = 0;
  for (int l = 0; l < spec.n_layers(); ++l)
    n += static_cast<long>(spec.fan_in(l)) * spec.fan_out(l) + spec.fan_out(l);
  return n;
}

long layer_offset(const MLPSpec& spec, int layer) {
  long off = 0;
  for (int l = 0; l < layer; ++l)
    off += static_cast<long>(spec.fan_in(l)) * spec.fan_out(l) + spec.fan_out(l);
  return off;
}

const Segment& FlatParams::segment(const std::string& name) const {
  for (const Segment& s : segments)
    if (s.name == name) return s;
  throw std::invalid_argument("FlatParams: no segment named '" + name + "'");
}

void fill_glorot(const MLPSpec& spec, Rng& rng, std::span<double> out) {
  if (static_cast<long>(out.size()) != param_count(spec))
    throw std::invalid_argument("fill_glorot: span length != param_count");
  size_t at = 0;
  for (int l = 0; l < spec.n_layers(); ++l) {
    const int fi = spec.fan_in(l), fo = spec.fan_out(l);
    const double bound = std::sqrt(6.0 / (fi + fo));
    for (int i = 0; i < fi * fo; ++i) out[at++] = rng.uniform(-bound, bound);
    for (int i = 0; i < fo; ++i) out[at++] = 0.0;
  }
}

FlatParams init_params(const MLPSpec& spec, std::uint64_t seed) {
  spec.validate();
  FlatParams p;
  p.values.resize(param_count(spec));
  Rng rng(seed);
  fill_glorot(spec, rng, {p.values.data(), static_cast<size_t>(p.values.size())});
  p.segments = {{"mlp", 0, p.size()}};
  return p;
}

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

RowMajorMap weight_of(const MLPSpec& spec, std::span<const double> params, int l, long off) {
  return RowMajorMap(params.data() + off, spec.fan_out(l), spec.fan_in(l));
}

Eigen::Map<const Eigen::VectorXd> bias_of(const MLPSpec& spec, std::span<const double> params,
                                          int l, long off) {
  const long wsize = static_cast<long>(spec.fan_in(l)) * spec.fan_out(l);
  return Eigen::Map<const Eigen::VectorXd>(params.data() + off + wsize, spec.fan_out(l));
}

}  // namespace

Eigen::VectorXd mlp_apply(const MLPSpec& spec, std::span<const double> params,
                          const Eigen::VectorXd& x) {
  if (x.size() != spec.input_dim) throw std::invalid_argument("mlp_apply: input dim mismatch");
  if (static_cast<long>(params.size()) != param_count(spec))
    throw std::invalid_argument("mlp_apply: param length mismatch");
  Eigen::VectorXd h = x;
  for (int l = 0; l < spec.n_layers(); ++l) {
    const long off = layer_offset(spec, l);
    Eigen::VectorXd z = weight_of(spec, params, l, off) * h + bias_of(spec, params, l, off);
    if (l + 1 < spec.n_layers()) {
      if (spec.activation == Activation::kTanh)
        h = z.array().tanh();
      else
        h = z.cwiseMax(0.0);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Eigen::MatrixXd mlp_eval(const MLPSpec& spec, std::span<const double> params,
                         const Eigen::MatrixXd& X) {
  if (X.rows() != spec.input_dim) throw std::invalid_argument("mlp_eval: input dim mismatch");
  if (static_cast<long>(params.size()) != param_count(spec))
    throw std::invalid_argument("mlp_eval: param length mismatch");
  Eigen::MatrixXd h = X;
  for (int l = 0; l < spec.n_layers(); ++l) {
    const long off = layer_offset(spec, l);
    Eigen::MatrixXd z = weight_of(spec, params, l, off) * h;
    z.colwise() += Eigen::VectorXd(bias_of(spec, params, l, off));
    if (l + 1 < spec.n_layers()) {
      if (spec.activation == Activation::kTanh)
        h = z.array().tanh();
      else
        h = z.cwiseMax(0.0);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

std::vector<Jet2> mlp_apply_jet(const MLPSpec& spec, std::span<const double> params,
                                const std::vector<Jet2>& x) {
  if (static_cast<int>(x.size()) != spec.input_dim)
    throw std::invalid_argument("mlp_apply_jet: input dim mismatch");
  if (static_cast<long>(params.size()) != param_count(spec))
    throw std::invalid_argument("mlp_apply_jet: param length mismatch");
  const int dims = x.empty() ? 1 : x[0].dims;
  for (const Jet2& j : x) require_same_dims(x[0], j);

  std::vector<Jet2> h = x;
  std::vector<Jet2> z;
  for (int l = 0; l < spec.n_layers(); ++l) {
    const long off = layer_offset(spec, l);
    auto W = weight_of(spec, params, l, off);
    auto b = bias_of(spec, params, l, off);
    z.assign(static_cast<size_t>(spec.fan_out(l)), Jet2(0.0, dims));
    for (int r = 0; r < spec.fan_out(l); ++r) {
      Jet2 acc = jet_constant(b[r], dims);
      for (int c = 0; c < spec.fan_in(l); ++c) acc = acc + W(r, c) * h[c];
      z[r] = acc;
    }
    if (l + 1 < spec.n_layers()) {
      for (Jet2& j : z) j = spec.activation == Activation::kTanh ? jet_tanh(j) : jet_relu(j);
    }
    h = z;
  }
  return h;
}

TapeMlp tape_mlp(Tape& tape, const MLPSpec& spec, NodeRef params_col, long base_offset) {
  TapeMlp net;
  net.spec = &spec;
  for (int l = 0; l < spec.n_layers(); ++l) {
    const int fi = spec.fan_in(l), fo = spec.fan_out(l);
    const long off = base_offset + layer_offset(spec, l);
    net.W.push_back(tape.slice_rows(params_col, static_cast<int>(off), fo, fi));
    net.b.push_back(tape.slice_rows(params_col, static_cast<int>(off + long(fi) * fo), fo, 1));
  }
  return net;
}

NodeRef tape_mlp_eval(Tape& tape, const TapeMlp& net, NodeRef X) {
  const MLPSpec& spec = *net.spec;
  NodeRef h = X;
  for (int l = 0; l < spec.n_layers(); ++l) {
    NodeRef z = tape.add_col(tape.matmul(net.W[l], h), net.b[l]);
    if (l + 1 < spec.n_layers())
      h = spec.activation == Activation::kTanh ? tape.tanh_act(z) : tape.relu_act(z);
    else
      h = z;
  }
  return h;
}

namespace {

// Null-aware helpers: an invalid NodeRef stands for a structurally zero
// channel, so ops short-circuit instead of materializing zero matrices.
NodeRef mm(Tape& t, NodeRef W, NodeRef x) { return x.valid() ? t.matmul(W, x) : NodeRef{}; }

NodeRef add2(Tape& t, NodeRef a, NodeRef b) {
  if (!a.valid()) return b;
  if (!b.valid()) return a;
  return t.add(a, b);
}

NodeRef mul2(Tape& t, NodeRef a, NodeRef b) {
  if (!a.valid() || !b.valid()) return NodeRef{};
  return t.mul(a, b);
}

}  // namespace

JetBatch tape_mlp_jet(Tape& tape, const TapeMlp& net, const JetBatch& x) {
  const MLPSpec& spec = *net.spec;
  if (spec.activation != Activation::kTanh)
    throw std::invalid_argument("tape_mlp_jet: only tanh hidden activation is supported");

  JetBatch h = x;
  for (int l = 0; l < spec.n_layers(); ++l) {
    // Affine layer: bias shifts only the value channel.
    JetBatch z;
    z.pairs = h.pairs;
    z.v = tape.add_col(tape.matmul(net.W[l], h.v), net.b[l]);
    for (NodeRef d : h.d1) z.d1.push_back(mm(tape, net.W[l], d));
    for (NodeRef d : h.d2) z.d2.push_back(mm(tape, net.W[l], d));

    if (l + 1 < spec.n_layers()) {
      // tanh: f' = 1 - t^2, f'' = -2 t f'.
      NodeRef t = tape.tanh_act(z.v);
      NodeRef fp = tape.affine(tape.square(t), -1.0, 1.0);
      NodeRef fpp = (z.pairs.empty()) ? NodeRef{} : tape.mul(tape.affine(t, -2.0, 0.0), fp);
      JetBatch a;
      a.pairs = z.pairs;
      a.v = t;
      for (NodeRef d : z.d1) a.d1.push_back(mul2(tape, fp, d));
      for (size_t p = 0; p < z.pairs.size(); ++p) {
        auto [i, j] = z.pairs[p];
        NodeRef curv = mul2(tape, fpp, mul2(tape, z.d1[i], z.d1[j]));
        a.d2.push_back(add2(tape, mul2(tape, fp, z.d2[p]), curv));
      }
      h = a;
    } else {
      h = z;
    }
  }
  return h;
}

}  // namespace fbh
