#include "fbh/hypernet.hpp"

#include <stdexcept>

namespace fbh {

void ChunkedHypernetSpec::validate() const {
  body.validate();
  if (n_chunks < 1) throw std::invalid_argument("hypernet: n_chunks must be positive");
  if (target_params < 1) throw std::invalid_argument("hypernet: target_params must be positive");
  if (chunk_size != static_cast<int>((target_params + n_chunks - 1) / n_chunks))
    throw std::invalid_argument("hypernet: chunk_size != ceil(P / n_chunks)");
  if (static_cast<long>(n_chunks) * chunk_size < target_params)
    throw std::invalid_argument("hypernet: chunks do not cover the target parameters");
  if (emb_dim != (n_chunks == 1 ? 0 : n_chunks))
    throw std::invalid_argument("hypernet: embedding dim must be n_chunks (or 0 unchunked)");
  if (body.input_dim != task_dim + emb_dim)
    throw std::invalid_argument("hypernet: body input dim != task_dim + emb_dim");
  if (body.output_dim != chunk_size)
    throw std::invalid_argument("hypernet: body output dim != chunk_size");
}

ChunkedHypernetSpec chunked_hypernet(int task_dim, std::vector<int> hidden, long target_params,
                                     int n_chunks) {
  ChunkedHypernetSpec s;
  s.n_chunks = n_chunks;
  s.target_params = target_params;
  s.chunk_size = static_cast<int>((target_params + n_chunks - 1) / n_chunks);
  s.task_dim = task_dim;
  s.emb_dim = n_chunks == 1 ? 0 : n_chunks;
  s.body = mlp_spec(task_dim + s.emb_dim, std::move(hidden), s.chunk_size, Activation::kRelu);
  s.validate();
  return s;
}

long hyper_param_count(const ChunkedHypernetSpec& spec) {
  return param_count(spec.body) + static_cast<long>(spec.n_chunks) * spec.emb_dim;
}

long embedding_offset(const ChunkedHypernetSpec& spec, int i) {
  if (i < 0 || i >= spec.n_chunks) throw std::invalid_argument("embedding_offset: bad chunk index");
  return param_count(spec.body) + static_cast<long>(i) * spec.emb_dim;
}

void fill_hyper_params(const ChunkedHypernetSpec& spec, Rng& rng, std::span<double> out) {
  if (static_cast<long>(out.size()) != hyper_param_count(spec))
    throw std::invalid_argument("fill_hyper_params: span length mismatch");
  const long nb = param_count(spec.body);
  fill_glorot(spec.body, rng, out.subspan(0, static_cast<size_t>(nb)));
  for (size_t i = static_cast<size_t>(nb); i < out.size(); ++i) out[i] = rng.normal();
}

FlatParams init_hyper_params(const ChunkedHypernetSpec& spec, std::uint64_t seed) {
  spec.validate();
  FlatParams p;
  p.values.resize(hyper_param_count(spec));
  Rng rng(seed);
  fill_hyper_params(spec, rng, {p.values.data(), static_cast<size_t>(p.values.size())});
  p.segments = {{"hypernet", 0, p.size()}};
  return p;
}

namespace {

Eigen::VectorXd chunk_input(const ChunkedHypernetSpec& spec, std::span<const double> hp,
                            const Eigen::VectorXd& task, int i) {
  Eigen::VectorXd in(spec.body.input_dim);
  in.head(spec.task_dim) = task;
  if (spec.emb_dim > 0)
    in.tail(spec.emb_dim) =
        Eigen::Map<const Eigen::VectorXd>(hp.data() + embedding_offset(spec, i), spec.emb_dim);
  return in;
}

}  // namespace

Eigen::VectorXd generate_params(const ChunkedHypernetSpec& spec, std::span<const double> hp,
                                const Eigen::VectorXd& task) {
  if (task.size() != spec.task_dim)
    throw std::invalid_argument("generate_params: task length mismatch");
  if (static_cast<long>(hp.size()) != hyper_param_count(spec))
    throw std::invalid_argument("generate_params: hyper param length mismatch");
  const std::span<const double> body_p = hp.subspan(0, static_cast<size_t>(param_count(spec.body)));
  Eigen::VectorXd full(static_cast<long>(spec.n_chunks) * spec.chunk_size);
  for (int i = 0; i < spec.n_chunks; ++i)
    full.segment(static_cast<long>(i) * spec.chunk_size, spec.chunk_size) =
        mlp_apply(spec.body, body_p, chunk_input(spec, hp, task, i));
  return full.head(spec.target_params);
}

Eigen::VectorXd dual_generate(const ChunkedHypernetSpec& op_spec,
                              const ChunkedHypernetSpec& dom_spec, std::span<const double> op_p,
                              std::span<const double> dom_p, const Eigen::VectorXd& a,
                              const Eigen::VectorXd& sub) {
  if (op_spec.n_chunks != dom_spec.n_chunks || op_spec.chunk_size != dom_spec.chunk_size ||
      op_spec.target_params != dom_spec.target_params)
    throw std::invalid_argument("dual_generate: hypernets disagree on chunk geometry");
  const auto op_body = op_p.subspan(0, static_cast<size_t>(param_count(op_spec.body)));
  const auto dom_body = dom_p.subspan(0, static_cast<size_t>(param_count(dom_spec.body)));
  Eigen::VectorXd full(static_cast<long>(op_spec.n_chunks) * op_spec.chunk_size);
  for (int i = 0; i < op_spec.n_chunks; ++i) {
    Eigen::VectorXd ho = mlp_apply(op_spec.body, op_body, chunk_input(op_spec, op_p, a, i));
    Eigen::VectorXd hd = mlp_apply(dom_spec.body, dom_body, chunk_input(dom_spec, dom_p, sub, i));
    full.segment(static_cast<long>(i) * op_spec.chunk_size, op_spec.chunk_size) =
        ho.cwiseProduct(hd);
  }
  return full.head(op_spec.target_params);
}

TapeHypernet tape_hypernet(Tape& tape, const ChunkedHypernetSpec& spec, NodeRef hyper_params,
                           long base_offset) {
  TapeHypernet net;
  net.spec = &spec;
  net.body = tape_mlp(tape, spec.body, hyper_params, base_offset);
  for (int i = 0; i < spec.n_chunks && spec.emb_dim > 0; ++i)
    net.emb.push_back(tape.slice_rows(
        hyper_params, static_cast<int>(base_offset + embedding_offset(spec, i)), spec.emb_dim, 1));
  return net;
}

namespace {

// All chunk inputs as one (body_input x n_chunks) node: the interleaved
// column [task; c_0; task; c_1; ...] reinterpreted row-major puts one
// [task; c_i] per row, and A*B^T against the weight transposes it away.
NodeRef chunk_input_matrix(Tape& tape, const TapeHypernet& net, NodeRef task_col) {
  const ChunkedHypernetSpec& spec = *net.spec;
  if (spec.emb_dim == 0) return task_col;
  std::vector<NodeRef> parts;
  parts.reserve(static_cast<size_t>(2 * spec.n_chunks));
  for (int i = 0; i < spec.n_chunks; ++i) {
    parts.push_back(task_col);
    parts.push_back(net.emb[i]);
  }
  return tape.slice_rows(tape.vstack(parts), 0, spec.n_chunks, spec.body.input_dim);
}

// Batched body forward over all chunks -> (chunk_size x n_chunks).
NodeRef all_chunks(Tape& tape, const TapeHypernet& net, NodeRef task_col) {
  const MLPSpec& body = net.spec->body;
  NodeRef X = chunk_input_matrix(tape, net, task_col);
  NodeRef h;
  for (int l = 0; l < body.n_layers(); ++l) {
    NodeRef z = l == 0 ? (net.spec->emb_dim == 0 ? tape.matmul(net.body.W[0], X)
                                                 : tape.matmul_tb(net.body.W[0], X))
                       : tape.matmul(net.body.W[l], h);
    z = tape.add_col(z, net.body.b[l]);
    if (l + 1 < body.n_layers())
      h = body.activation == Activation::kTanh ? tape.tanh_act(z) : tape.relu_act(z);
    else
      h = z;
  }
  return h;
}

NodeRef truncate_to_target(Tape& tape, const ChunkedHypernetSpec& spec, NodeRef chunks) {
  NodeRef full = tape.flatten_cols(chunks);
  if (static_cast<long>(spec.n_chunks) * spec.chunk_size == spec.target_params) return full;
  return tape.slice_rows(full, 0, static_cast<int>(spec.target_params), 1);
}

}  // namespace

NodeRef tape_generate(Tape& tape, const TapeHypernet& net, NodeRef task_col) {
  return truncate_to_target(tape, *net.spec, all_chunks(tape, net, task_col));
}

NodeRef tape_dual_generate(Tape& tape, const TapeHypernet& op_net, const TapeHypernet& dom_net,
                           NodeRef a_col, NodeRef sub_col) {
  const ChunkedHypernetSpec &op_spec = *op_net.spec, &dom_spec = *dom_net.spec;
  if (op_spec.n_chunks != dom_spec.n_chunks || op_spec.chunk_size != dom_spec.chunk_size ||
      op_spec.target_params != dom_spec.target_params)
    throw std::invalid_argument("tape_dual_generate: hypernets disagree on chunk geometry");
  NodeRef merged =
      tape.mul(all_chunks(tape, op_net, a_col), all_chunks(tape, dom_net, sub_col));
  return truncate_to_target(tape, op_spec, merged);
}

}  // namespace fbh
