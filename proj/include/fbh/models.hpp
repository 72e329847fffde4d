#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "fbh/decomposition.hpp"
#include "fbh/hypernet.hpp"
#include "fbh/jet.hpp"
#include "fbh/mlp.hpp"
#include "fbh/tape.hpp"

namespace fbh {

// ---------------------------------------------------------------------------
// Model descriptions

/// Independent subdomain networks blended by normalized windows.
struct FbPinnModel {
  Decomposition dec;
  MLPSpec subnet;  // input dec.dim(), output 1, tanh
};

/// One non-chunked hypernetwork maps each subdomain descriptor [m; s] to the
/// full weight vector of a shared-architecture subdomain net.
struct FbHyPinnModel {
  Decomposition dec;
  ChunkedHypernetSpec hyper;  // task_dim = 2*dec.dim(), n_chunks = 1
  MLPSpec target;
};

/// Branch/trunk inner product with a scalar output bias.
struct DeepOnetModel {
  MLPSpec branch;  // sensor readings -> q
  MLPSpec trunk;   // query coordinates -> q
};

/// Chunked hypernetwork maps sensor readings to target-network weights; the
/// target net consumes raw query coordinates.
struct HyperDeepOnetModel {
  ChunkedHypernetSpec hyper;  // task_dim = n_sensors
  MLPSpec target;
};

/// Subdomain-blended operator model. With `dual` set, two chunked
/// hypernetworks (sensors -> chunks and [m; s] -> chunks) merge via a
/// chunk-wise Hadamard product; otherwise one hypernetwork reads the
/// concatenated [a; m; s] task.
struct FbHyDonModel {
  Decomposition dec;
  bool dual = false;
  ChunkedHypernetSpec op_hyper;
  ChunkedHypernetSpec dom_hyper;  // ignored unless dual
  MLPSpec target;
};

// ---------------------------------------------------------------------------
// Parameter layout and initialization.
//
// Segment names: FBPINN "sub_<j>"; FB-HyPINN and HyperDeepONet "hyper";
// DeepONet "branch", "trunk", "bias"; FB-HyDON "op_hyper" (+ "dom_hyper"
// when dual). Hypernetwork-based layouts are independent of the number of
// subdomains.

long model_param_count(const FbPinnModel& m);
long model_param_count(const FbHyPinnModel& m);
long model_param_count(const DeepOnetModel& m);
long model_param_count(const HyperDeepOnetModel& m);
long model_param_count(const FbHyDonModel& m);

FlatParams model_init(const FbPinnModel& m, std::uint64_t seed);
FlatParams model_init(const FbHyPinnModel& m, std::uint64_t seed);
FlatParams model_init(const DeepOnetModel& m, std::uint64_t seed);
FlatParams model_init(const HyperDeepOnetModel& m, std::uint64_t seed);
FlatParams model_init(const FbHyDonModel& m, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Scalar jet forwards (off tape). Every coordinate of x (resp. the query y)
// is lifted as a tracked direction with full second-order channels; operator
// inputs `a` are plain constants.

Jet2 forward_jet(const FbPinnModel& m, const FlatParams& p, const Eigen::VectorXd& x);
Jet2 forward_jet(const FbHyPinnModel& m, const FlatParams& p, const Eigen::VectorXd& x);
Jet2 forward_jet(const DeepOnetModel& m, const FlatParams& p, const Eigen::VectorXd& a,
                 const Eigen::VectorXd& y);
Jet2 forward_jet(const HyperDeepOnetModel& m, const FlatParams& p, const Eigen::VectorXd& a,
                 const Eigen::VectorXd& y);
Jet2 forward_jet(const FbHyDonModel& m, const FlatParams& p, const Eigen::VectorXd& a,
                 const Eigen::VectorXd& y);

// ---------------------------------------------------------------------------
// Batched value-only prediction (off tape), for evaluation grids. pts is
// dim x N; the result is 1 x N.

Eigen::RowVectorXd predict(const FbPinnModel& m, const FlatParams& p, const Eigen::MatrixXd& pts);
Eigen::RowVectorXd predict(const FbHyPinnModel& m, const FlatParams& p,
                           const Eigen::MatrixXd& pts);
Eigen::RowVectorXd predict(const DeepOnetModel& m, const FlatParams& p, const Eigen::VectorXd& a,
                           const Eigen::MatrixXd& pts);
Eigen::RowVectorXd predict(const HyperDeepOnetModel& m, const FlatParams& p,
                           const Eigen::VectorXd& a, const Eigen::MatrixXd& pts);
Eigen::RowVectorXd predict(const FbHyDonModel& m, const FlatParams& p, const Eigen::VectorXd& a,
                           const Eigen::MatrixXd& pts);

// ---------------------------------------------------------------------------
// Prepared point batches for training.

/// Which derivative channels a residual needs: first derivatives along the
/// first `dims` coordinates and the second-order `pairs` (i <= j) among them.
struct ChannelSpec {
  int dims = 1;
  std::vector<std::pair<int, int>> pairs;
};

/// Parameter-independent constants for one point batch: per-subdomain active
/// columns, normalized inputs with their first-derivative channels, and
/// normalized-window channels. Computed once per point set and turned into
/// no-grad leaves each training step.
struct PreparedBatch {
  int n = 0;
  bool windowed = true;
  ChannelSpec ch;
  Eigen::MatrixXd pts;  // dim x n

  struct PerSub {
    int j = 0;                                // subdomain index
    std::vector<int> cols;                    // columns of pts active here
    Eigen::MatrixXd xnorm;                    // dim x n_j
    std::vector<Eigen::MatrixXd> xnorm_d1;    // ch.dims entries, dim x n_j
    Eigen::RowVectorXd win_v;                 // 1 x n_j
    std::vector<Eigen::RowVectorXd> win_d1;   // ch.dims entries
    std::vector<Eigen::RowVectorXd> win_d2;   // ch.pairs entries
  };
  std::vector<PerSub> subs;
};

/// Normalized inputs and window channels per subdomain. Throws
/// std::domain_error if some point is covered by no subdomain.
PreparedBatch prepare_batch(const Decomposition& dec, const Eigen::MatrixXd& pts,
                            const ChannelSpec& ch);

/// No decomposition: one group holding every column, raw coordinates, no
/// window channels.
PreparedBatch prepare_plain(const Eigen::MatrixXd& pts, const ChannelSpec& ch);

// ---------------------------------------------------------------------------
// Tape staging: hoist parameter slicing / weight generation once per
// recording, then evaluate any number of prepared batches against the staged
// nets.

/// One target net per subdomain, or a single net at index 0 for models
/// without a decomposition.
struct StagedField {
  std::vector<TapeMlp> nets;
};

StagedField stage(Tape& tape, const FbPinnModel& m, NodeRef params);
StagedField stage(Tape& tape, const FbHyPinnModel& m, NodeRef params);

/// Hypernetwork weights are sliced once per recording; per-function target
/// parameters are generated from them by stage_fn.
TapeHypernet stage_hyper(Tape& tape, const HyperDeepOnetModel& m, NodeRef params);
StagedField stage_fn(Tape& tape, const HyperDeepOnetModel& m, const TapeHypernet& hyper,
                     const Eigen::VectorXd& a);

struct StagedDualHyper {
  TapeHypernet op;
  TapeHypernet dom;
  bool dual = false;
};

StagedDualHyper stage_hyper(Tape& tape, const FbHyDonModel& m, NodeRef params);
StagedField stage_fn(Tape& tape, const FbHyDonModel& m, const StagedDualHyper& hyper,
                     const Eigen::VectorXd& a);

/// Model output rows (1 x n value plus derivative channels) over a prepared
/// batch: evaluates each group's net on its columns, applies the window
/// product rule, and scatters into full-width rows.
JetBatch field_rows(Tape& tape, const StagedField& staged, const PreparedBatch& batch);

/// DeepONet staging: branch, trunk, and the scalar output bias.
struct StagedDon {
  TapeMlp branch, trunk;
  NodeRef bias;  // 1 x 1
};

StagedDon stage(Tape& tape, const DeepOnetModel& m, NodeRef params);

/// Trunk jet channels (q x n) over a plain prepared batch; shared by every
/// function evaluated at the same points within one recording.
JetBatch trunk_rows(Tape& tape, const StagedDon& staged, const PreparedBatch& batch);

/// One function's output rows: branch(a) contracted against the shared trunk
/// channels, bias added to the value channel.
JetBatch don_rows(Tape& tape, const StagedDon& staged, const JetBatch& trunk,
                  const Eigen::VectorXd& a);

/// A whole minibatch of functions at once: sensor columns A (n_sensors x B)
/// through the branch in one pass, contracted against the shared trunk
/// channels. Row i of each B x n channel belongs to function i.
JetBatch don_rows_batched(Tape& tape, const StagedDon& staged, const JetBatch& trunk,
                          const Eigen::MatrixXd& A);

}  // namespace fbh
