#include "fbh/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <functional>

namespace fbh {
namespace {

using Eigen::VectorXcd;
using Eigen::VectorXd;
using std::complex;

// Signed wavenumber of spectrum index i on an n-point grid.
int wave_index(int i, int n) { return i <= n / 2 ? i : i - n; }

struct Pseudospectral {
  int n;
  Eigen::FFT<double> fft;
  VectorXd kw;  // angular wavenumbers, spectrum order

  Pseudospectral(int n_, double length) : n(n_) {
    kw.resize(n);
    for (int i = 0; i < n; ++i) kw[i] = 2.0 * M_PI * wave_index(i, n) / length;
  }

  VectorXcd forward(const VectorXd& u) {
    VectorXcd in = u.cast<complex<double>>(), out(n);
    fft.fwd(out, in);
    return out;
  }

  VectorXd inverse(const VectorXcd& uhat) {
    VectorXcd out(n);
    fft.inv(out, uhat);
    return out.real();
  }
};

// 2/3-rule dealiasing mask (1 on kept modes, 0 on the aliased third).
VectorXd dealias_mask(int n) {
  VectorXd mask(n);
  for (int i = 0; i < n; ++i) mask[i] = (std::abs(wave_index(i, n)) > n / 3) ? 0.0 : 1.0;
  return mask;
}

// u_t = L u + N(u) with diagonal L, N(u)^ = mult .* FFT(g(u)): integrating
// factor for the linear part, classical RK4 for the rest.
ReferenceSolution ifrk4(const VectorXd& a, double lo, double length, const VectorXd& L,
                        const VectorXcd& mult,
                        const std::function<VectorXd(const VectorXd&)>& g,
                        const SpectralConfig& cfg) {
  const int n = static_cast<int>(a.size());
  if (n < 8 || n % 2 != 0) throw std::invalid_argument("ifrk4: grid size must be even, >= 8");
  if (cfg.n_snapshots < 2 || cfg.dt <= 0.0 || cfg.t_end <= 0.0)
    throw std::invalid_argument("ifrk4: bad time-stepping configuration");

  const double exact_total = cfg.t_end / cfg.dt;
  const long total_steps = std::lround(exact_total);
  const double exact_per_snap = exact_total / (cfg.n_snapshots - 1);
  const long steps_per_snap = std::lround(exact_per_snap);
  if (std::abs(exact_total - total_steps) > 1e-9 * total_steps ||
      std::abs(exact_per_snap - steps_per_snap) > 1e-9 * steps_per_snap ||
      steps_per_snap < 1)
    throw std::invalid_argument("ifrk4: snapshots must land on whole time steps");

  Pseudospectral ps(n, length);
  const double dt = cfg.dt;
  const VectorXcd E = (0.5 * dt * L.array()).exp().cast<complex<double>>();
  const VectorXcd E2 = (dt * L.array()).exp().cast<complex<double>>();
  const double bound = cfg.blowup_factor * (1.0 + a.cwiseAbs().maxCoeff());

  ReferenceSolution sol;
  sol.x.resize(n);
  for (int i = 0; i < n; ++i) sol.x[i] = lo + length * i / n;
  sol.t.resize(cfg.n_snapshots);
  sol.u.resize(n, cfg.n_snapshots);

  auto nhat = [&](const VectorXcd& uhat) -> VectorXcd {
    return (mult.array() * ps.forward(g(ps.inverse(uhat))).array()).matrix();
  };

  VectorXcd uhat = ps.forward(a);
  for (long step = 0; step <= total_steps; ++step) {
    if (step % steps_per_snap == 0) {
      const int snap = static_cast<int>(step / steps_per_snap);
      const VectorXd u = ps.inverse(uhat);
      if (!u.allFinite() || u.cwiseAbs().maxCoeff() > bound)
        throw InstabilityError("spectral solve left the stable regime");
      sol.t[snap] = step * dt;
      // The first snapshot is the initial condition itself, untouched by the
      // transform round trip.
      sol.u.col(snap) = (step == 0) ? a : u;
    }
    if (step == total_steps) break;

    const VectorXcd k1 = nhat(uhat);
    const VectorXcd k2 = nhat((E.array() * (uhat + 0.5 * dt * k1).array()).matrix());
    const VectorXcd k3 = nhat(((E.array() * uhat.array()).matrix() + 0.5 * dt * k2));
    const VectorXcd k4 =
        nhat((E2.array() * uhat.array() + dt * E.array() * k3.array()).matrix());
    uhat = (E2.array() * uhat.array() +
            (dt / 6.0) * (E2.array() * k1.array() + 2.0 * E.array() * (k2 + k3).array() +
                          k4.array()))
               .matrix();
  }
  return sol;
}

}  // namespace

ReferenceSolution burgers_reference(const Eigen::VectorXd& a, double lo, double length,
                                    double nu, const SpectralConfig& cfg) {
  const int n = static_cast<int>(a.size());
  Pseudospectral tmp(n, length);
  const VectorXd L = (-nu * tmp.kw.array().square()).matrix();
  // Conservative nonlinearity N(u) = -(u^2/2)_x: multiplier -i k/2, dealiased.
  const VectorXd mask = dealias_mask(n);
  VectorXcd mult(n);
  for (int i = 0; i < n; ++i) mult[i] = complex<double>(0.0, -0.5 * tmp.kw[i] * mask[i]);
  return ifrk4(a, lo, length, L, mult,
               [](const VectorXd& u) { return VectorXd(u.cwiseProduct(u)); }, cfg);
}

ReferenceSolution allen_cahn_reference(const Eigen::VectorXd& a, double lo, double length,
                                       const SpectralConfig& cfg) {
  const int n = static_cast<int>(a.size());
  Pseudospectral tmp(n, length);
  const VectorXd L = (-1e-4 * tmp.kw.array().square() + 5.0).matrix();
  const VectorXcd mult = (-5.0 * dealias_mask(n).array()).cast<complex<double>>().matrix();
  return ifrk4(a, lo, length, L, mult,
               [](const VectorXd& u) { return VectorXd(u.array().cube().matrix()); }, cfg);
}

}  // namespace fbh
