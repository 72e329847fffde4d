#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace fbh {

/// Reference field on a tensor grid: u(x_i, t_j) at column j.
struct ReferenceSolution {
  Eigen::VectorXd x;  // spatial grid (uniform, periodic: right endpoint open)
  Eigen::VectorXd t;  // snapshot times, starting at 0
  Eigen::MatrixXd u;  // nx x nt
};

struct SpectralConfig {
  double dt = 2e-4;
  int n_snapshots = 101;
  double t_end = 1.0;
  double blowup_factor = 1e3;  // |u| > factor * (1 + |a|_inf) aborts
};

/// The time integration left the stable regime (non-finite values or
/// amplitude blow-up).
struct InstabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Periodic viscous Burgers u_t + u u_x = nu u_xx on [lo, lo+length), solved
/// by Fourier pseudo-spectral IFRK4 (integrating factor for the diffusion,
/// conservative dealiased nonlinearity). `a` holds initial values on the
/// uniform grid; its size sets the resolution.
ReferenceSolution burgers_reference(const Eigen::VectorXd& a, double lo, double length,
                                    double nu, const SpectralConfig& cfg = {});

/// Periodic Allen-Cahn u_t = 1e-4 u_xx - 5 u^3 + 5 u, same scheme (the linear
/// reaction term rides in the integrating factor).
ReferenceSolution allen_cahn_reference(const Eigen::VectorXd& a, double lo, double length,
                                       const SpectralConfig& cfg = {});

}  // namespace fbh
