#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "fbh/mlp.hpp"

namespace fbh {

/// A hypernetwork that emits a target net's parameter vector in chunks: the
/// ReLU body maps [task ; chunk_embedding_i] to one chunk of size
/// ceil(P / n_chunks); the n_chunks outputs are concatenated and truncated
/// to P. Non-chunked mode (n_chunks == 1) drops the embedding entirely and
/// the body maps the task straight to all P parameters.
struct ChunkedHypernetSpec {
  MLPSpec body;
  int n_chunks = 1;
  int chunk_size = 0;
  long target_params = 0;  // P
  int task_dim = 0;
  int emb_dim = 0;  // == n_chunks when chunked, 0 when n_chunks == 1

  void validate() const;
};

/// Builds the spec; hidden widths follow the tables' "[w] x n" convention.
ChunkedHypernetSpec chunked_hypernet(int task_dim, std::vector<int> hidden, long target_params,
                                     int n_chunks);

/// Body parameters plus n_chunks embeddings of length emb_dim.
long hyper_param_count(const ChunkedHypernetSpec& spec);

/// Offset of chunk embedding `i` within the hypernet's parameter block.
long embedding_offset(const ChunkedHypernetSpec& spec, int i);

/// Glorot body, standard-normal embeddings; deterministic per seed.
FlatParams init_hyper_params(const ChunkedHypernetSpec& spec, std::uint64_t seed);
void fill_hyper_params(const ChunkedHypernetSpec& spec, Rng& rng, std::span<double> out);

/// Plain (off-tape) generation of target parameters for one task input.
Eigen::VectorXd generate_params(const ChunkedHypernetSpec& spec, std::span<const double> hp,
                                const Eigen::VectorXd& task);

/// Dual-hypernetwork merge: chunk i of the result is the Hadamard product
/// h_O(a, c_i) ⊙ h_D(sub, c_i); both hypernets must share chunk geometry.
Eigen::VectorXd dual_generate(const ChunkedHypernetSpec& op_spec,
                              const ChunkedHypernetSpec& dom_spec, std::span<const double> op_p,
                              std::span<const double> dom_p, const Eigen::VectorXd& a,
                              const Eigen::VectorXd& sub);

// ---- tape versions (gradients flow into body weights and embeddings) -------

/// Body weights and chunk embeddings sliced out of a parameter leaf once per
/// recording, shared by every generate call on that tape.
struct TapeHypernet {
  const ChunkedHypernetSpec* spec = nullptr;
  TapeMlp body;
  std::vector<NodeRef> emb;  // empty when non-chunked
};

TapeHypernet tape_hypernet(Tape& tape, const ChunkedHypernetSpec& spec, NodeRef hyper_params,
                           long base_offset);

/// Target-parameter column node (P x 1). `task_col` is typically a constant
/// leaf holding sensor values or a subdomain vector. All chunks are evaluated
/// as one batched body forward.
NodeRef tape_generate(Tape& tape, const TapeHypernet& net, NodeRef task_col);

/// Chunk i of the result is h_O(a, c_i) ⊙ h_D(sub, c_i).
NodeRef tape_dual_generate(Tape& tape, const TapeHypernet& op_net, const TapeHypernet& dom_net,
                           NodeRef a_col, NodeRef sub_col);

}  // namespace fbh
