#pragma once

#include <Eigen/Dense>
#include <complex>

#include "fbh/rng.hpp"

namespace fbh {

/// Periodic Gaussian random field on [lo, lo+length) with spectral density
/// sigma^2 (k_w^2 + tau^2)^(-power), k_w = 2 pi k / length. Fields are
/// synthesized directly in Fourier space on `n` grid points (n even), so a
/// sample can be re-evaluated exactly at arbitrary locations by trigonometric
/// interpolation.
struct GrfSampler {
  int n = 128;
  double lo = 0.0;
  double length = 1.0;
  double sigma = 25.0;
  double tau = 5.0;
  int power = 4;
};

/// One draw: one-sided spectral coefficients c_k (k = 0..n/2; c_0 and c_{n/2}
/// real) under the convention u_j = sum_k c_k exp(i 2 pi k j / n) with
/// c_{-k} = conj(c_k), plus the synthesized grid values.
struct GrfSample {
  double lo = 0.0;
  double length = 1.0;
  Eigen::VectorXcd coef;  // n/2 + 1 entries
  Eigen::VectorXd grid;   // n values at lo + i*length/n

  double eval(double x) const;
  Eigen::VectorXd eval(const Eigen::VectorXd& xs) const;
};

/// Target variance of spectral coefficient k: E|c_k|^2.
double grf_mode_variance(const GrfSampler& s, int k);

/// Draw order: c_0, then for k = 1..n/2-1 the real and imaginary parts, then
/// the (real) Nyquist coefficient — all from `rng`, so a fixed stream yields
/// a fixed field.
GrfSample sample_grf(const GrfSampler& s, Rng& rng);

}  // namespace fbh
