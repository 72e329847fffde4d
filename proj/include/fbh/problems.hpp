#pragma once

#include <Eigen/Dense>

#include "fbh/jet.hpp"
#include "fbh/models.hpp"
#include "fbh/rng.hpp"
#include "fbh/tape.hpp"

namespace fbh {

// ---------------------------------------------------------------------------
// Derivative channels per problem family. Direction conventions: 1D problems
// track their single coordinate; space-time problems track x as direction 0
// and t as direction 1 with the single second-order pair (0,0) = u_xx.

ChannelSpec channels_sinusoidal();  // {1, {}}
ChannelSpec channels_oscillator();  // {1, {(0,0)}}
ChannelSpec channels_space_time();  // {2, {(0,0)}}

// ---------------------------------------------------------------------------
// Pointwise residuals on jets.

/// du/dx - cos(omega x): u' = cos(omega x) with u(0) = 0.
double residual_sinusoidal(const Jet2& u, double x, double omega);

/// m u'' + mu u' + k u: unforced damped oscillator.
double residual_oscillator(const Jet2& u, double m, double mu, double k);

/// u_t + u u_x - nu u_xx.
double residual_burgers(const Jet2& u, double nu);

/// u_t - 1e-4 u_xx + 5 u^3 - 5 u.
double residual_allen_cahn(const Jet2& u);

// ---------------------------------------------------------------------------
// Batched residual rows over model output channels (1 x n each).

NodeRef residual_rows_sinusoidal(Tape& tape, const JetBatch& u, const Eigen::RowVectorXd& cos_wx);
NodeRef residual_rows_oscillator(Tape& tape, const JetBatch& u, double m, double mu, double k);
NodeRef residual_rows_burgers(Tape& tape, const JetBatch& u, double nu);
NodeRef residual_rows_allen_cahn(Tape& tape, const JetBatch& u);

// ---------------------------------------------------------------------------
// Closed forms.

/// sin(omega x)/omega: solves u' = cos(omega x), u(0) = 0.
double exact_sinusoidal(double x, double omega);

/// Under-damped response e^(-delta t)(u0 cos(w t) + (v0 + delta u0)/w sin(w t))
/// with delta = mu/2m, w = sqrt(k/m - delta^2). Throws std::domain_error
/// unless delta < sqrt(k/m).
double exact_oscillator(double t, double u0, double v0, double m, double mu, double k);
Jet2 exact_oscillator_jet(const Jet2& t, double u0, double v0, double m, double mu, double k);

/// -sin(pi x): viscous Burgers benchmark initial condition.
double burgers_initial(double x);

// ---------------------------------------------------------------------------
// Point samplers (points are columns).

/// n equispaced values including both endpoints (n >= 2).
Eigen::VectorXd linspace(double lo, double hi, int n);

/// Uniform samples in the box [lo, hi]; coordinates drawn point-major.
Eigen::MatrixXd random_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n, Rng& rng);

/// Randomly shifted Halton samples in [lo, hi]: uniform marginals with
/// low-discrepancy spacing, so the largest gap shrinks like 1/n instead of
/// the log(n)/n gaps of independent draws.  Deterministic per rng state.
Eigen::MatrixXd quasirandom_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int n,
                                Rng& rng);

/// All (x, t) combinations, x-major (t varies fastest), as 2 x (nx*nt).
Eigen::MatrixXd tensor_grid(const Eigen::VectorXd& xs, const Eigen::VectorXd& ts);

}  // namespace fbh
