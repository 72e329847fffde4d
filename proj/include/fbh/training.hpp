#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fbh/tape.hpp"

namespace fbh {

/// Staircase decay: base * decay^floor(step / period).
struct LrSchedule {
  double base = 1e-3;
  double decay = 1.0;
  long period = 1000;

  double at(long step) const;
};

struct AdamConfig {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m, v;
  long t = 0;

  explicit AdamState(long n)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// One bias-corrected Adam update, in place.
void adam_step(AdamState& st, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr,
               const AdamConfig& cfg = {});

/// Scales g down to max_norm when its 2-norm exceeds it; returns the pre-clip
/// norm. max_norm <= 0 disables clipping.
double clip_grad_norm(Eigen::VectorXd& g, double max_norm);

struct HistoryRow {
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
  double eval_metric = 0.0;
  bool has_eval = false;
};

/// Training left the finite regime (loss, gradient, or parameters). Carries
/// the history recorded up to the failing step so partial progress can still
/// be persisted.
struct DivergenceError : std::runtime_error {
  long step;
  std::vector<HistoryRow> history;
  DivergenceError(const std::string& msg, long s, std::vector<HistoryRow> h = {})
      : std::runtime_error(msg), step(s), history(std::move(h)) {}
};

struct TrainOptions {
  long steps = 1000;
  LrSchedule lr;
  double clip = 1e3;    // <= 0 disables
  long log_every = 100; // history cadence; first and last step always kept
  long eval_every = 0;  // 0: never run the eval callback
};

struct TrainResult {
  Eigen::VectorXd params;
  std::vector<HistoryRow> history;
  double final_loss = 0.0;
};

/// Full-gradient Adam driver: build_loss records the scalar loss for the
/// current parameter leaf on a fresh tape every step (any minibatch rotation
/// lives inside the closure, keyed on `step`). The optional eval callback
/// sees post-update parameters at eval_every cadence and on the final step.
TrainResult train_adam(
    Eigen::VectorXd init, const TrainOptions& opt,
    const std::function<NodeRef(Tape& tape, NodeRef params, long step)>& build_loss,
    const std::function<double(const Eigen::VectorXd& params, long step)>& eval = {});

/// sum of squares / count, as a tape node.
NodeRef mean_square(Tape& tape, NodeRef rows);

}  // namespace fbh
