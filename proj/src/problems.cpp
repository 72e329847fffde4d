#include "fbh/problems.hpp"

#include <cmath>
#include <iterator>
#include <stdexcept>

namespace fbh {
namespace {

void need_channels(const Jet2& u, int dims, bool second) {
  if (u.dims != dims) throw std::invalid_argument("residual: jet tracks wrong direction count");
  (void)second;
}

}  // namespace

ChannelSpec channels_sinusoidal() { return {1, {}}; }
ChannelSpec channels_oscillator() { return {1, {{0, 0}}}; }
ChannelSpec channels_space_time() { return {2, {{0, 0}}}; }

// ---------------------------------------------------------------------------
// Pointwise residuals

double residual_sinusoidal(const Jet2& u, double x, double omega) {
  need_channels(u, 1, false);
  return u.d1[0] - std::cos(omega * x);
}

double residual_oscillator(const Jet2& u, double m, double mu, double k) {
  need_channels(u, 1, true);
  return m * u.d2_at(0, 0) + mu * u.d1[0] + k * u.v;
}

double residual_burgers(const Jet2& u, double nu) {
  need_channels(u, 2, true);
  return u.d1[1] + u.v * u.d1[0] - nu * u.d2_at(0, 0);
}

double residual_allen_cahn(const Jet2& u) {
  need_channels(u, 2, true);
  return u.d1[1] - 1e-4 * u.d2_at(0, 0) + 5.0 * u.v * u.v * u.v - 5.0 * u.v;
}

// ---------------------------------------------------------------------------
// Batched residual rows

namespace {

void need_rows(const JetBatch& u, int dims, size_t pairs) {
  if (static_cast<int>(u.d1.size()) != dims || u.d2.size() < pairs)
    throw std::invalid_argument("residual rows: missing derivative channels");
}

}  // namespace

NodeRef residual_rows_sinusoidal(Tape& tape, const JetBatch& u,
                                 const Eigen::RowVectorXd& cos_wx) {
  need_rows(u, 1, 0);
  return tape.sub(u.d1[0], tape.leaf(cos_wx));
}

NodeRef residual_rows_oscillator(Tape& tape, const JetBatch& u, double m, double mu, double k) {
  need_rows(u, 1, 1);
  NodeRef r = tape.affine(u.d2[0], m, 0.0);
  r = tape.add(r, tape.affine(u.d1[0], mu, 0.0));
  return tape.add(r, tape.affine(u.v, k, 0.0));
}

NodeRef residual_rows_burgers(Tape& tape, const JetBatch& u, double nu) {
  need_rows(u, 2, 1);
  NodeRef r = tape.add(u.d1[1], tape.mul(u.v, u.d1[0]));
  return tape.add(r, tape.affine(u.d2[0], -nu, 0.0));
}

NodeRef residual_rows_allen_cahn(Tape& tape, const JetBatch& u) {
  need_rows(u, 2, 1);
  const NodeRef u3 = tape.mul(tape.square(u.v), u.v);
  NodeRef r = tape.add(u.d1[1], tape.affine(u.d2[0], -1e-4, 0.0));
  r = tape.add(r, tape.affine(u3, 5.0, 0.0));
  return tape.add(r, tape.affine(u.v, -5.0, 0.0));
}

// ---------------------------------------------------------------------------
// Closed forms

double exact_sinusoidal(double x, double omega) { return std::sin(omega * x) / omega; }

namespace {

struct OscParams {
  double delta, w;
};

OscParams osc_params(double m, double mu, double k) {
  const double delta = mu / (2.0 * m);
  const double w0sq = k / m;
  if (delta * delta >= w0sq)
    throw std::domain_error("exact_oscillator: system must be under-damped (delta < omega_0)");
  return {delta, std::sqrt(w0sq - delta * delta)};
}

}  // namespace

double exact_oscillator(double t, double u0, double v0, double m, double mu, double k) {
  const auto [delta, w] = osc_params(m, mu, k);
  return std::exp(-delta * t) *
         (u0 * std::cos(w * t) + (v0 + delta * u0) / w * std::sin(w * t));
}

Jet2 exact_oscillator_jet(const Jet2& t, double u0, double v0, double m, double mu, double k) {
  const auto [delta, w] = osc_params(m, mu, k);
  const Jet2 envelope = jet_exp(t * (-delta));
  const Jet2 carrier = u0 * jet_cos(t * w) + ((v0 + delta * u0) / w) * jet_sin(t * w);
  return jet_mul(envelope, carrier);
}

double burgers_initial(double x) { return -std::sin(M_PI * x); }

// ---------------------------------------------------------------------------
// Point samplers

Eigen::VectorXd linspace(double lo, double hi, int n) {
  if (n < 2) throw std::invalid_argument("linspace: need at least two points");
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  return out;
}

Eigen::MatrixXd random_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n,
                           Rng& rng) {
  const int d = static_cast<int>(lo.size());
  if (hi.size() != d) throw std::invalid_argument("random_box: lo/hi size mismatch");
  Eigen::MatrixXd pts(d, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < d; ++r) pts(r, c) = rng.uniform(lo[r], hi[r]);
  return pts;
}

namespace {

// Radical-inverse of i in the given base: digit-reverse across the decimal point.
double radical_inverse(long i, int base) {
  double value = 0.0;
  double scale = 1.0 / base;
  while (i > 0) {
    value += (i % base) * scale;
    i /= base;
    scale /= base;
  }
  return value;
}

}  // namespace

Eigen::MatrixXd quasirandom_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n,
                                Rng& rng) {
  static const int primes[] = {2, 3, 5, 7, 11, 13};
  const int d = static_cast<int>(lo.size());
  if (hi.size() != d) throw std::invalid_argument("quasirandom_box: lo/hi size mismatch");
  if (d > static_cast<int>(std::size(primes)))
    throw std::invalid_argument("quasirandom_box: too many dimensions");
  Eigen::VectorXd shift(d);
  for (int r = 0; r < d; ++r) shift[r] = rng.uniform(0.0, 1.0);
  Eigen::MatrixXd pts(d, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < d; ++r) {
      double u = radical_inverse(c + 1, primes[r]) + shift[r];
      u -= std::floor(u);
      u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
      pts(r, c) = lo[r] + (hi[r] - lo[r]) * u;
    }
  return pts;
}

Eigen::MatrixXd tensor_grid(const Eigen::VectorXd& xs, const Eigen::VectorXd& ts) {
  Eigen::MatrixXd pts(2, xs.size() * ts.size());
  int c = 0;
  for (int i = 0; i < xs.size(); ++i)
    for (int j = 0; j < ts.size(); ++j) {
      pts(0, c) = xs[i];
      pts(1, c) = ts[j];
      ++c;
    }
  return pts;
}

}  // namespace fbh
