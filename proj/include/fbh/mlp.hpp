#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbh/jet.hpp"
#include "fbh/rng.hpp"
#include "fbh/tape.hpp"

namespace fbh {

enum class Activation { kTanh, kRelu };

/// Fully connected network shape. "hidden" lists the hidden-layer widths
/// (n entries of width w for the tables' "[w] x n"); the output layer is
/// always linear.
struct MLPSpec {
  int input_dim = 1;
  std::vector<int> hidden;
  int output_dim = 1;
  Activation activation = Activation::kTanh;

  int n_layers() const { return static_cast<int>(hidden.size()) + 1; }
  int fan_in(int layer) const { return layer == 0 ? input_dim : hidden[layer - 1]; }
  int fan_out(int layer) const {
    return layer == n_layers() - 1 ? output_dim : hidden[layer];
  }
  void validate() const;  // throws std::invalid_argument
};

inline MLPSpec mlp_spec(int in, std::vector<int> hidden, int out, Activation act) {
  return MLPSpec{in, std::move(hidden), out, act};
}

/// Total trainable parameters: sum over layers of fan_in*fan_out + fan_out.
long param_count(const MLPSpec& spec);

/// Offset of layer `l`'s weight block within the MLP's parameter vector.
/// Layout per layer: weights row-major (fan_out x fan_in), then bias.
long layer_offset(const MLPSpec& spec, int layer);

/// Contiguous trainable parameters plus the named segments composing them
/// (one segment for a plain MLP, several for composite models).
struct Segment {
  std::string name;
  long offset = 0;
  long size = 0;
};

struct FlatParams {
  Eigen::VectorXd values;
  std::vector<Segment> segments;

  long size() const { return static_cast<long>(values.size()); }
  const Segment& segment(const std::string& name) const;  // throws if absent
  std::span<const double> span_of(const Segment& s) const {
    return {values.data() + s.offset, static_cast<size_t>(s.size)};
  }
};

/// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases,
/// drawn from `rng` in layout order.
void fill_glorot(const MLPSpec& spec, Rng& rng, std::span<double> out);

/// Single-segment FlatParams for one MLP, deterministic per seed.
FlatParams init_params(const MLPSpec& spec, std::uint64_t seed);

// ---- plain & jet evaluation (no tape) --------------------------------------

/// x (input_dim) -> output (output_dim).
Eigen::VectorXd mlp_apply(const MLPSpec& spec, std::span<const double> params,
                          const Eigen::VectorXd& x);

/// Batched: X is input_dim x N, result output_dim x N.
Eigen::MatrixXd mlp_eval(const MLPSpec& spec, std::span<const double> params,
                         const Eigen::MatrixXd& X);

/// Jet-valued evaluation; output jets carry exact first/second derivatives
/// of the network with respect to the tracked input directions.
std::vector<Jet2> mlp_apply_jet(const MLPSpec& spec, std::span<const double> params,
                                const std::vector<Jet2>& x);

// ---- tape (trainable) evaluation -------------------------------------------

/// Per-layer weight/bias nodes sliced out of a parameter column node (a leaf
/// for directly trained nets, or a hypernetwork output for generated nets).
struct TapeMlp {
  const MLPSpec* spec = nullptr;
  std::vector<NodeRef> W, b;
};

TapeMlp tape_mlp(Tape& tape, const MLPSpec& spec, NodeRef params_col, long base_offset);

/// Plain batched forward: X is input_dim x N (node), result output_dim x N.
NodeRef tape_mlp_eval(Tape& tape, const TapeMlp& net, NodeRef X);

/// Batched second-order jets on tape: one matrix node per derivative channel,
/// every channel shaped like the value channel. d1 has one entry per tracked
/// direction; d2 one per (i,j) pair in `pairs` (i <= j, indices into d1).
/// An invalid NodeRef marks a channel that is structurally zero.
struct JetBatch {
  NodeRef v;
  std::vector<NodeRef> d1;
  std::vector<NodeRef> d2;
  std::vector<std::pair<int, int>> pairs;
};

/// Propagates jets through the net. Hidden activation must be tanh (ReLU
/// networks never see jet inputs in the models built here).
JetBatch tape_mlp_jet(Tape& tape, const TapeMlp& net, const JetBatch& x);

}  // namespace fbh
