#include "fbh/grf.hpp"

#include <cmath>
#include <stdexcept>

namespace fbh {

double grf_mode_variance(const GrfSampler& s, int k) {
  const double kw = 2.0 * M_PI * k / s.length;
  return s.sigma * s.sigma * std::pow(kw * kw + s.tau * s.tau, -s.power);
}

GrfSample sample_grf(const GrfSampler& s, Rng& rng) {
  if (s.n < 4 || s.n % 2 != 0) throw std::invalid_argument("sample_grf: n must be even, >= 4");
  const int half = s.n / 2;

  GrfSample out;
  out.lo = s.lo;
  out.length = s.length;
  out.coef.resize(half + 1);
  out.coef[0] = std::sqrt(grf_mode_variance(s, 0)) * rng.normal();
  for (int k = 1; k < half; ++k) {
    // Complex coefficient with E|c_k|^2 = var_k, split evenly between parts.
    const double amp = std::sqrt(0.5 * grf_mode_variance(s, k));
    const double re = amp * rng.normal();
    const double im = amp * rng.normal();
    out.coef[k] = {re, im};
  }
  out.coef[half] = std::sqrt(grf_mode_variance(s, half)) * rng.normal();

  out.grid.resize(s.n);
  for (int j = 0; j < s.n; ++j) out.grid[j] = out.eval(s.lo + s.length * j / s.n);
  return out;
}

double GrfSample::eval(double x) const {
  const int half = static_cast<int>(coef.size()) - 1;
  const double base = 2.0 * M_PI * (x - lo) / length;
  double u = coef[0].real();
  for (int k = 1; k < half; ++k)
    u += 2.0 * (coef[k].real() * std::cos(k * base) - coef[k].imag() * std::sin(k * base));
  u += coef[half].real() * std::cos(half * base);
  return u;
}

Eigen::VectorXd GrfSample::eval(const Eigen::VectorXd& xs) const {
  Eigen::VectorXd out(xs.size());
  for (int i = 0; i < xs.size(); ++i) out[i] = eval(xs[i]);
  return out;
}

}  // namespace fbh
