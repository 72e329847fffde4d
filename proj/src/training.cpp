#include "fbh/training.hpp"

#include <cmath>

namespace fbh {

double LrSchedule::at(long step) const {
  if (period <= 0) return base;
  return base * std::pow(decay, static_cast<double>(step / period));
}

void adam_step(AdamState& st, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr,
               const AdamConfig& cfg) {
  if (params.size() != grad.size() || params.size() != st.m.size())
    throw std::invalid_argument("adam_step: size mismatch");
  st.t += 1;
  st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * grad;
  st.v = cfg.beta2 * st.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  params.array() -=
      lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + cfg.eps);
}

double clip_grad_norm(Eigen::VectorXd& g, double max_norm) {
  const double norm = g.norm();
  if (max_norm > 0.0 && norm > max_norm) g *= max_norm / norm;
  return norm;
}

NodeRef mean_square(Tape& tape, NodeRef rows) {
  const auto& v = tape.value(rows);
  return tape.affine(tape.sum_all(tape.square(rows)), 1.0 / static_cast<double>(v.size()),
                     0.0);
}

TrainResult train_adam(
    Eigen::VectorXd init, const TrainOptions& opt,
    const std::function<NodeRef(Tape& tape, NodeRef params, long step)>& build_loss,
    const std::function<double(const Eigen::VectorXd& params, long step)>& eval) {
  TrainResult res;
  res.params = std::move(init);
  AdamState st(res.params.size());

  for (long step = 0; step < opt.steps; ++step) {
    Tape tape;
    const NodeRef p = tape.leaf(res.params, /*requires_grad=*/true);
    const NodeRef loss = build_loss(tape, p, step);
    const double L = tape.value(loss)(0, 0);
    if (!std::isfinite(L)) throw DivergenceError("loss became non-finite", step, res.history);

    tape.backward(loss);
    Eigen::VectorXd g = tape.grad(p);
    if (!g.allFinite()) throw DivergenceError("gradient became non-finite", step, res.history);
    const double gnorm = clip_grad_norm(g, opt.clip);

    const double lr = opt.lr.at(step);
    adam_step(st, res.params, g, lr);
    if (!res.params.allFinite())
      throw DivergenceError("parameters became non-finite", step, res.history);
    res.final_loss = L;

    const bool last = step + 1 == opt.steps;
    const bool log = last || step == 0 || (opt.log_every > 0 && step % opt.log_every == 0);
    const bool do_eval = eval && (last || (opt.eval_every > 0 && (step + 1) % opt.eval_every == 0));
    if (log || do_eval) {
      HistoryRow row;
      row.step = step;
      row.loss = L;
      row.lr = lr;
      row.grad_norm = gnorm;
      if (do_eval) {
        row.eval_metric = eval(res.params, step);
        row.has_eval = true;
      }
      res.history.push_back(row);
    }
  }
  return res;
}

}  // namespace fbh
