#include "fbh/metrics.hpp"

#include <stdexcept>

namespace fbh {
namespace {

void check_shapes(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw std::invalid_argument("metrics: shape mismatch");
  if (pred.size() == 0) throw std::invalid_argument("metrics: empty input");
}

}  // namespace

double rel_l2(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  check_shapes(pred, truth);
  const double denom = truth.norm();
  if (denom == 0.0) throw std::invalid_argument("rel_l2: truth is identically zero");
  return (pred - truth).norm() / denom;
}

double mae(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  check_shapes(pred, truth);
  return (pred - truth).cwiseAbs().mean();
}

}  // namespace fbh
