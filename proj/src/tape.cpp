#include "fbh/tape.hpp"

#include <stdexcept>

namespace fbh {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

NodeRef Tape::leaf(Eigen::MatrixXd v, bool requires_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(v);
  n.needs_grad = requires_grad;
  return push(std::move(n));
}

NodeRef Tape::scalar(double v) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return leaf(std::move(m), false);
}

NodeRef Tape::slice_rows(NodeRef src, int offset, int rows, int cols) {
  const Node& s = nodes_[src.idx];
  require(s.value.cols() == 1, "slice_rows: source must be a column vector");
  require(offset >= 0 && offset + rows * cols <= s.value.rows(), "slice_rows: range out of bounds");
  Node n;
  n.op = Op::kSliceRows;
  n.a = src.idx;
  n.i0 = offset;
  n.i1 = rows;
  n.i2 = cols;
  n.needs_grad = s.needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::matmul(NodeRef a, NodeRef b) {
  const Node &na = nodes_[a.idx], &nb = nodes_[b.idx];
  require(na.value.cols() == nb.value.rows(), "matmul: inner dimensions differ");
  Node n;
  n.op = Op::kMatMul;
  n.a = a.idx;
  n.b = b.idx;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::matmul_ta(NodeRef a, NodeRef b) {
  const Node &na = nodes_[a.idx], &nb = nodes_[b.idx];
  require(na.value.rows() == nb.value.rows(), "matmul_ta: inner dimensions differ");
  Node n;
  n.op = Op::kMatMulTA;
  n.a = a.idx;
  n.b = b.idx;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::matmul_tb(NodeRef a, NodeRef b) {
  const Node &na = nodes_[a.idx], &nb = nodes_[b.idx];
  require(na.value.cols() == nb.value.cols(), "matmul_tb: inner dimensions differ");
  Node n;
  n.op = Op::kMatMulTB;
  n.a = a.idx;
  n.b = b.idx;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::add_col(NodeRef x, NodeRef b) {
  const Node &nx = nodes_[x.idx], &nb = nodes_[b.idx];
  require(nb.value.cols() == 1 && nb.value.rows() == nx.value.rows(),
          "add_col: bias must be a column vector matching rows");
  Node n;
  n.op = Op::kAddCol;
  n.a = x.idx;
  n.b = b.idx;
  n.needs_grad = nx.needs_grad || nb.needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::add(NodeRef a, NodeRef b) {
  const Node &na = nodes_[a.idx], &nb = nodes_[b.idx];
  require(na.value.rows() == nb.value.rows() && na.value.cols() == nb.value.cols(),
          "add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = a.idx;
  n.b = b.idx;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::sub(NodeRef a, NodeRef b) {
  const Node &na = nodes_[a.idx], &nb = nodes_[b.idx];
  require(na.value.rows() == nb.value.rows() && na.value.cols() == nb.value.cols(),
          "sub: shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.a = a.idx;
  n.b = b.idx;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::mul(NodeRef a, NodeRef b) {
  const Node &na = nodes_[a.idx], &nb = nodes_[b.idx];
  require(na.value.rows() == nb.value.rows() && na.value.cols() == nb.value.cols(),
          "mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = a.idx;
  n.b = b.idx;
  n.needs_grad = na.needs_grad || nb.needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::affine(NodeRef x, double a, double b) {
  Node n;
  n.op = Op::kAffine;
  n.a = x.idx;
  n.c0 = a;
  n.c1 = b;
  n.needs_grad = nodes_[x.idx].needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::tanh_act(NodeRef x) {
  Node n;
  n.op = Op::kTanh;
  n.a = x.idx;
  n.needs_grad = nodes_[x.idx].needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::relu_act(NodeRef x) {
  Node n;
  n.op = Op::kRelu;
  n.a = x.idx;
  n.needs_grad = nodes_[x.idx].needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::square(NodeRef x) {
  Node n;
  n.op = Op::kSquare;
  n.a = x.idx;
  n.needs_grad = nodes_[x.idx].needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::sum_all(NodeRef x) {
  Node n;
  n.op = Op::kSumAll;
  n.a = x.idx;
  n.needs_grad = nodes_[x.idx].needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::vstack(std::span<const NodeRef> parts) {
  require(!parts.empty(), "vstack: no parts");
  Node n;
  n.op = Op::kVStack;
  n.many.reserve(parts.size());
  for (NodeRef p : parts) {
    require(nodes_[p.idx].value.cols() == 1, "vstack: parts must be column vectors");
    n.many.push_back(p.idx);
    n.needs_grad = n.needs_grad || nodes_[p.idx].needs_grad;
  }
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::flatten_cols(NodeRef x) {
  Node n;
  n.op = Op::kFlattenCols;
  n.a = x.idx;
  n.needs_grad = nodes_[x.idx].needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

NodeRef Tape::scatter_cols(NodeRef src, std::vector<int> idx, int out_cols) {
  const Node& s = nodes_[src.idx];
  require(static_cast<int>(idx.size()) == s.value.cols(), "scatter_cols: one index per column");
  for (int j : idx) require(j >= 0 && j < out_cols, "scatter_cols: index out of range");
  Node n;
  n.op = Op::kScatterCols;
  n.a = src.idx;
  n.i0 = out_cols;
  n.many = std::move(idx);
  n.needs_grad = s.needs_grad;
  n.value = compute(n);
  return push(std::move(n));
}

Eigen::MatrixXd Tape::compute(const Node& n) const {
  switch (n.op) {
    case Op::kLeaf:
      return n.value;
    case Op::kSliceRows: {
      const Eigen::MatrixXd& v = nodes_[n.a].value;
      using RowMajorMap =
          Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
      return RowMajorMap(v.data() + n.i0, n.i1, n.i2);
    }
    case Op::kMatMul:
      return nodes_[n.a].value * nodes_[n.b].value;
    case Op::kMatMulTA:
      return nodes_[n.a].value.transpose() * nodes_[n.b].value;
    case Op::kMatMulTB:
      return nodes_[n.a].value * nodes_[n.b].value.transpose();
    case Op::kAddCol:
      return nodes_[n.a].value.colwise() + Eigen::VectorXd(nodes_[n.b].value.col(0));
    case Op::kAdd:
      return nodes_[n.a].value + nodes_[n.b].value;
    case Op::kSub:
      return nodes_[n.a].value - nodes_[n.b].value;
    case Op::kMul:
      return nodes_[n.a].value.cwiseProduct(nodes_[n.b].value);
    case Op::kAffine:
      return (n.c0 * nodes_[n.a].value.array() + n.c1).matrix();
    case Op::kTanh:
      return nodes_[n.a].value.array().tanh().matrix();
    case Op::kRelu:
      return nodes_[n.a].value.cwiseMax(0.0);
    case Op::kSquare:
      return nodes_[n.a].value.array().square().matrix();
    case Op::kSumAll: {
      Eigen::MatrixXd m(1, 1);
      m(0, 0) = nodes_[n.a].value.sum();
      return m;
    }
    case Op::kVStack: {
      Eigen::Index rows = 0;
      for (int p : n.many) rows += nodes_[p].value.rows();
      Eigen::MatrixXd m(rows, 1);
      Eigen::Index at = 0;
      for (int p : n.many) {
        m.block(at, 0, nodes_[p].value.rows(), 1) = nodes_[p].value;
        at += nodes_[p].value.rows();
      }
      return m;
    }
    case Op::kFlattenCols: {
      const Eigen::MatrixXd& v = nodes_[n.a].value;
      return Eigen::Map<const Eigen::MatrixXd>(v.data(), v.size(), 1);
    }
    case Op::kScatterCols: {
      const Eigen::MatrixXd& s = nodes_[n.a].value;
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(s.rows(), n.i0);
      for (int k = 0; k < s.cols(); ++k) m.col(n.many[k]) += s.col(k);
      return m;
    }
  }
  throw std::logic_error("tape: unknown op");
}

Eigen::MatrixXd& Tape::adj_of(int i) {
  Node& n = nodes_[i];
  if (!n.seen) {
    n.adj.setZero(n.value.rows(), n.value.cols());
    n.seen = true;
  }
  return n.adj;
}

void Tape::backward(NodeRef output) {
  require(output.valid() && output.idx < size(), "backward: bad output node");
  Node& out = nodes_[output.idx];
  require(out.value.rows() == 1 && out.value.cols() == 1, "backward: output must be a scalar node");
  for (Node& n : nodes_) n.seen = false;
  adj_of(output.idx)(0, 0) = 1.0;

  for (int i = output.idx; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.seen || !n.needs_grad || n.op == Op::kLeaf) continue;
    const Eigen::MatrixXd& g = n.adj;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kSliceRows: {
        if (!nodes_[n.a].needs_grad) break;
        Eigen::MatrixXd& pa = adj_of(n.a);
        using RowMajorMap =
            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
        RowMajorMap(pa.data() + n.i0, n.i1, n.i2) += g;
        break;
      }
      case Op::kMatMul:
        if (nodes_[n.a].needs_grad) adj_of(n.a).noalias() += g * nodes_[n.b].value.transpose();
        if (nodes_[n.b].needs_grad) adj_of(n.b).noalias() += nodes_[n.a].value.transpose() * g;
        break;
      case Op::kMatMulTA:
        if (nodes_[n.a].needs_grad) adj_of(n.a).noalias() += nodes_[n.b].value * g.transpose();
        if (nodes_[n.b].needs_grad) adj_of(n.b).noalias() += nodes_[n.a].value * g;
        break;
      case Op::kMatMulTB:
        if (nodes_[n.a].needs_grad) adj_of(n.a).noalias() += g * nodes_[n.b].value;
        if (nodes_[n.b].needs_grad) adj_of(n.b).noalias() += g.transpose() * nodes_[n.a].value;
        break;
      case Op::kAddCol:
        if (nodes_[n.a].needs_grad) adj_of(n.a) += g;
        if (nodes_[n.b].needs_grad) adj_of(n.b) += g.rowwise().sum();
        break;
      case Op::kAdd:
        if (nodes_[n.a].needs_grad) adj_of(n.a) += g;
        if (nodes_[n.b].needs_grad) adj_of(n.b) += g;
        break;
      case Op::kSub:
        if (nodes_[n.a].needs_grad) adj_of(n.a) += g;
        if (nodes_[n.b].needs_grad) adj_of(n.b) -= g;
        break;
      case Op::kMul:
        if (nodes_[n.a].needs_grad) adj_of(n.a) += g.cwiseProduct(nodes_[n.b].value);
        if (nodes_[n.b].needs_grad) adj_of(n.b) += g.cwiseProduct(nodes_[n.a].value);
        break;
      case Op::kAffine:
        if (nodes_[n.a].needs_grad) adj_of(n.a) += n.c0 * g;
        break;
      case Op::kTanh:
        if (nodes_[n.a].needs_grad)
          adj_of(n.a).array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::kRelu:
        if (nodes_[n.a].needs_grad)
          adj_of(n.a).array() += g.array() * (n.value.array() > 0.0).cast<double>();
        break;
      case Op::kSquare:
        if (nodes_[n.a].needs_grad)
          adj_of(n.a).array() += 2.0 * g.array() * nodes_[n.a].value.array();
        break;
      case Op::kSumAll:
        if (nodes_[n.a].needs_grad) adj_of(n.a).array() += g(0, 0);
        break;
      case Op::kVStack: {
        Eigen::Index at = 0;
        for (int p : n.many) {
          const Eigen::Index r = nodes_[p].value.rows();
          if (nodes_[p].needs_grad) adj_of(p) += g.block(at, 0, r, 1);
          at += r;
        }
        break;
      }
      case Op::kFlattenCols: {
        if (!nodes_[n.a].needs_grad) break;
        Eigen::MatrixXd& pa = adj_of(n.a);
        pa += Eigen::Map<const Eigen::MatrixXd>(g.data(), pa.rows(), pa.cols());
        break;
      }
      case Op::kScatterCols: {
        if (!nodes_[n.a].needs_grad) break;
        Eigen::MatrixXd& pa = adj_of(n.a);
        for (int k = 0; k < pa.cols(); ++k) pa.col(k) += g.col(n.many[k]);
        break;
      }
    }
  }
}

Eigen::VectorXd Tape::grad(NodeRef leaf) const {
  const Node& n = nodes_[leaf.idx];
  if (!n.seen) return Eigen::VectorXd::Zero(n.value.size());
  return Eigen::Map<const Eigen::VectorXd>(n.adj.data(), n.adj.size());
}

bool Tape::replay_matches() const {
  for (const Node& n : nodes_) {
    if (n.op == Op::kLeaf) continue;
    Eigen::MatrixXd v = compute(n);
    if (v.rows() != n.value.rows() || v.cols() != n.value.cols()) return false;
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (v.data()[i] != n.value.data()[i]) return false;
  }
  return true;
}

}  // namespace fbh
