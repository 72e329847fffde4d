#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace fbh {

/// Handle to a recorded tape node.
struct NodeRef {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

/// Reverse-mode tape recording matrix-valued operations (define-by-run).
///
/// Node values are dense matrices; a batch of collocation points travels as
/// columns, so the heavy ops are GEMMs rather than scalar graphs. Leaves
/// either require gradients (parameter vectors) or are constants; adjoint
/// propagation skips any subtree without gradient-requiring leaves.
///
/// A tape is single-writer: no two threads may record on or sweep the same
/// tape. Distinct tapes over shared read-only inputs are independent.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New leaf holding `v`. Parameter leaves pass requires_grad = true.
  NodeRef leaf(Eigen::MatrixXd v, bool requires_grad = false);

  /// 1x1 constant.
  NodeRef scalar(double v);

  /// Reinterpret `rows*cols` consecutive entries of a column-vector node,
  /// starting at `offset`, as a (rows x cols) matrix in row-major order.
  NodeRef slice_rows(NodeRef src, int offset, int rows, int cols);

  NodeRef matmul(NodeRef a, NodeRef b);     ///< A * B
  NodeRef matmul_ta(NodeRef a, NodeRef b);  ///< A^T * B
  NodeRef matmul_tb(NodeRef a, NodeRef b);  ///< A * B^T
  NodeRef add_col(NodeRef x, NodeRef b);    ///< X + b, b broadcast over columns

  NodeRef add(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b);
  NodeRef mul(NodeRef a, NodeRef b);  ///< Hadamard

  /// Elementwise a*x + b.
  NodeRef affine(NodeRef x, double a, double b);

  NodeRef tanh_act(NodeRef x);
  NodeRef relu_act(NodeRef x);
  NodeRef square(NodeRef x);

  /// Sum of all entries -> 1x1.
  NodeRef sum_all(NodeRef x);

  /// Stack column vectors vertically.
  NodeRef vstack(std::span<const NodeRef> parts);

  /// Reshape an (r x c) matrix into an (r*c x 1) column, column-major
  /// (column k of the source lands at rows [k*r, (k+1)*r)).
  NodeRef flatten_cols(NodeRef x);

  /// Place column k of `src` at column idx[k] of an (rows x out_cols) zero
  /// matrix, accumulating on collisions.
  NodeRef scatter_cols(NodeRef src, std::vector<int> idx, int out_cols);

  const Eigen::MatrixXd& value(NodeRef n) const { return nodes_[n.idx].value; }
  bool needs_grad(NodeRef n) const { return nodes_[n.idx].needs_grad; }

  /// Reverse sweep from a scalar (1x1) output. Throws on non-scalar output.
  /// May be called once per recording; clears previous adjoints first.
  void backward(NodeRef output);

  /// Adjoint of a leaf after backward(), flattened column-major (our leaves
  /// are column vectors, so this is just the vector). Zero if the leaf never
  /// influenced the output.
  Eigen::VectorXd grad(NodeRef leaf) const;

  int size() const { return static_cast<int>(nodes_.size()); }
  void clear() { nodes_.clear(); }

  /// Recompute every non-leaf value from the leaves; true iff all recorded
  /// values are reproduced bit-for-bit.
  bool replay_matches() const;

 private:
  enum class Op {
    kLeaf,
    kSliceRows,
    kMatMul,
    kMatMulTA,
    kMatMulTB,
    kAddCol,
    kAdd,
    kSub,
    kMul,
    kAffine,
    kTanh,
    kRelu,
    kSquare,
    kSumAll,
    kVStack,
    kFlattenCols,
    kScatterCols,
  };

  struct Node {
    Op op;
    int a = -1, b = -1;
    double c0 = 0.0, c1 = 0.0;
    int i0 = 0, i1 = 0, i2 = 0;
    std::vector<int> many;  // vstack parents / scatter column indices
    Eigen::MatrixXd value;
    Eigen::MatrixXd adj;
    bool needs_grad = false;
    bool seen = false;  // adjoint allocated during current backward
  };

  NodeRef push(Node n) {
    nodes_.push_back(std::move(n));
    return NodeRef{static_cast<int>(nodes_.size()) - 1};
  }

  Eigen::MatrixXd compute(const Node& n) const;
  Eigen::MatrixXd& adj_of(int i);

  std::vector<Node> nodes_;
};

/// dOutput/dLeaf for every entry of a gradient-requiring leaf; entries the
/// output does not depend on are exactly zero.
inline Eigen::VectorXd grad(Tape& tape, NodeRef output, NodeRef params_leaf) {
  tape.backward(output);
  return tape.grad(params_leaf);
}

/// Null-aware channel arithmetic: an invalid NodeRef stands for a
/// structurally zero derivative channel, so sums drop it and products
/// propagate it instead of materializing zero matrices.
inline NodeRef add_maybe(Tape& t, NodeRef a, NodeRef b) {
  if (!a.valid()) return b;
  if (!b.valid()) return a;
  return t.add(a, b);
}

inline NodeRef mul_maybe(Tape& t, NodeRef a, NodeRef b) {
  if (!a.valid() || !b.valid()) return NodeRef{};
  return t.mul(a, b);
}

}  // namespace fbh
