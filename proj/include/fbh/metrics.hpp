#pragma once

#include <Eigen/Dense>

namespace fbh {

/// ||pred - truth||_2 / ||truth||_2 over all entries. Throws
/// std::invalid_argument on shape mismatch or an identically zero truth.
double rel_l2(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

/// Mean absolute error over all entries.
double mae(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);

}  // namespace fbh
