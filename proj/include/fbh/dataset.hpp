#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fbh/mlp.hpp"

namespace fbh {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Named f64 arrays with explicit dimensions, stored in a little-endian
/// binary container (magic "FBHD", version 1). Matrices flatten column-major.
struct ArrayBundle {
  std::map<std::string, std::pair<std::vector<std::uint64_t>, Eigen::VectorXd>> arrays;

  bool has(const std::string& name) const { return arrays.count(name) != 0; }

  void put(const std::string& name, std::vector<std::uint64_t> dims, Eigen::VectorXd flat);
  void put_vector(const std::string& name, const Eigen::VectorXd& v);
  void put_matrix(const std::string& name, const Eigen::MatrixXd& m);
  void put_scalar(const std::string& name, double v);

  const Eigen::VectorXd& vec(const std::string& name) const;      // any rank, flat view
  const std::vector<std::uint64_t>& dims(const std::string& name) const;
  Eigen::MatrixXd matrix(const std::string& name) const;          // rank-2 only
  double scalar(const std::string& name) const;                   // single entry
};

void save_bundle(const std::string& path, const ArrayBundle& bundle);
ArrayBundle load_bundle(const std::string& path);

/// Stable digest of a parameter layout (segment names, offsets, sizes, total
/// length); checkpoints refuse to load into a different layout.
std::uint64_t layout_hash(const FlatParams& p);

/// Binary checkpoint (magic "FBHC", version 1): layout hash, segments, raw
/// f64 values. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const FlatParams& p);

/// Throws IoError if the file is unreadable, malformed, or was written for a
/// different parameter layout.
FlatParams load_checkpoint(const std::string& path, std::uint64_t expected_layout);

}  // namespace fbh
