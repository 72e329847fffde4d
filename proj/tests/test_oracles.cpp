#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "fbh/cole_hopf.hpp"
#include "fbh/grf.hpp"
#include "fbh/jet.hpp"
#include "fbh/metrics.hpp"
#include "fbh/problems.hpp"
#include "fbh/rng.hpp"
#include "fbh/spectral.hpp"

using fbh::GrfSample;
using fbh::GrfSampler;
using fbh::Jet2;
using fbh::ReferenceSolution;
using fbh::Rng;
using fbh::SpectralConfig;

TEST_SUITE("oracles") {

TEST_CASE("gauss-hermite rule integrates polynomials against exp(-z^2)") {
  Eigen::VectorXd z, w;
  fbh::gauss_hermite(60, z, w);
  REQUIRE(z.size() == 60);
  const double spi = std::sqrt(std::numbers::pi);
  CHECK(w.sum() == doctest::Approx(spi).epsilon(1e-12));
  CHECK(w.dot(z.cwiseProduct(z).eval()) == doctest::Approx(spi / 2).epsilon(1e-12));
  CHECK((w.array() * z.array().pow(4)).sum() == doctest::Approx(3 * spi / 4).epsilon(1e-12));
  CHECK(std::abs(w.dot(z)) < 1e-13);  // odd moments vanish
  // Nodes come out symmetric about zero.
  CHECK(std::abs(z.sum()) < 1e-12);
  // A genuinely non-polynomial integrand: int exp(-z^2) cos(z) = sqrt(pi) e^{-1/4}.
  CHECK((w.array() * z.array().cos()).sum() ==
        doctest::Approx(spi * std::exp(-0.25)).epsilon(1e-12));
}

TEST_CASE("closed-form viscous solution is odd and continuous down to t=0") {
  const double nu = 0.01 / std::numbers::pi;
  for (double t : {0.1, 0.3, 0.5, 0.9})
    CHECK(fbh::cole_hopf_burgers(0.0, t, nu) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  // Odd symmetry off the origin.
  CHECK(fbh::cole_hopf_burgers(0.4, 0.3, nu) ==
        doctest::Approx(-fbh::cole_hopf_burgers(-0.4, 0.3, nu)).epsilon(1e-10));
  // t -> 0+ recovers the initial condition. The solution itself drifts away
  // from -sin(pi x) at rate |nu u_xx - u u_x| <= pi/2 + nu pi^2, so the probe
  // time must sit well below tolerance / 1.6.
  for (double x : {-0.8, -0.3, 0.2, 0.7})
    CHECK(std::abs(fbh::cole_hopf_burgers(x, 1e-7, nu) + std::sin(std::numbers::pi * x)) < 1e-6);
}

TEST_CASE("closed-form viscous solution satisfies the pde under finite differences") {
  const double nu = 0.01 / std::numbers::pi;
  const double x = 0.3, t = 0.5;
  auto u = [&](double a, double b) { return fbh::cole_hopf_burgers(a, b, nu); };
  const double hx = 1e-3, ht = 1e-4;
  const double ux =
      (-u(x + 2 * hx, t) + 8 * u(x + hx, t) - 8 * u(x - hx, t) + u(x - 2 * hx, t)) / (12 * hx);
  const double uxx = (-u(x + 2 * hx, t) + 16 * u(x + hx, t) - 30 * u(x, t) + 16 * u(x - hx, t) -
                      u(x - 2 * hx, t)) /
                     (12 * hx * hx);
  const double ut = (u(x, t + ht) - u(x, t - ht)) / (2 * ht);
  Jet2 jet(u(x, t), 2);
  jet.d1[0] = ux;
  jet.d1[1] = ut;
  jet.d2_at(0, 0) = uxx;
  CHECK(std::abs(fbh::residual_burgers(jet, nu)) < 1e-4);
}

TEST_CASE("zero initial data stays zero and t=0 reproduces the input exactly") {
  const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(64);
  SpectralConfig cfg;
  cfg.n_snapshots = 6;
  cfg.t_end = 0.5;
  const ReferenceSolution r = fbh::burgers_reference(zeros, 0.0, 1.0, 0.01, cfg);
  CHECK(r.u.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(r.x.size() == 64);
  REQUIRE(r.t.size() == 6);
  CHECK(r.t[0] == 0.0);
  CHECK(r.t[5] == doctest::Approx(0.5));

  GrfSampler s;
  Rng rng(12);
  const GrfSample f = fbh::sample_grf(s, rng);
  const ReferenceSolution g = fbh::burgers_reference(f.grid, 0.0, 1.0, 0.01, cfg);
  CHECK((g.u.col(0) - f.grid).cwiseAbs().maxCoeff() == 0.0);
  // The spatial mean is conserved by the conservative-form nonlinearity.
  CHECK(g.u.col(5).mean() == doctest::Approx(f.grid.mean()).epsilon(1e-10).scale(1.0));
}

TEST_CASE("both viscous solvers agree to 1e-3 on the shared benchmark") {
  const double nu = 0.01 / std::numbers::pi;
  // The front near x = 0 narrows to ~2 / max|u_x| ~ 0.013 by t = 0.5, so the
  // spectral grid needs h well under that for its side of the comparison.
  const int nx = 1024;
  Eigen::VectorXd a(nx);
  for (int i = 0; i < nx; ++i) a[i] = -std::sin(std::numbers::pi * (-1.0 + 2.0 * i / nx));
  SpectralConfig cfg;
  cfg.dt = 2e-4;
  cfg.t_end = 0.5;
  cfg.n_snapshots = 11;
  const ReferenceSolution r = fbh::burgers_reference(a, -1.0, 2.0, nu, cfg);
  double worst = 0.0;
  for (int j = 0; j < r.t.size(); ++j) {
    const double t = r.t[j];
    for (int i = 0; i < nx; i += 4) {
      const double closed =
          t == 0.0 ? a[i] : fbh::cole_hopf_burgers(r.x[i], t, nu);
      worst = std::max(worst, std::abs(closed - r.u(i, j)));
    }
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("viscous solver self-converges under grid refinement") {
  GrfSampler s;  // length 1
  Rng rng(31);
  const GrfSample f = fbh::sample_grf(s, rng);
  SpectralConfig coarse;
  coarse.dt = 2e-4;
  coarse.n_snapshots = 11;
  const ReferenceSolution rc = fbh::burgers_reference(f.eval(fbh::linspace(0.0, 1.0 - 1.0 / 128, 128)),
                                                      0.0, 1.0, 0.01, coarse);
  SpectralConfig fine = coarse;
  fine.dt = 1e-4;
  const ReferenceSolution rf = fbh::burgers_reference(f.eval(fbh::linspace(0.0, 1.0 - 1.0 / 256, 256)),
                                                      0.0, 1.0, 0.01, fine);
  double worst = 0.0;
  for (int j = 0; j < rc.t.size(); ++j)
    for (int i = 0; i < 128; ++i) worst = std::max(worst, std::abs(rc.u(i, j) - rf.u(2 * i, j)));
  CHECK(worst < 1e-5);
}

TEST_CASE("phase-field equilibria are preserved and refinement converges") {
  SpectralConfig cfg;
  cfg.n_snapshots = 6;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(64);
  const ReferenceSolution r1 = fbh::allen_cahn_reference(ones, -1.0, 2.0, cfg);
  CHECK((r1.u.array() - 1.0).abs().maxCoeff() < 1e-10);
  const ReferenceSolution r0 =
      fbh::allen_cahn_reference(Eigen::VectorXd::Zero(64), -1.0, 2.0, cfg);
  CHECK(r0.u.cwiseAbs().maxCoeff() < 1e-10);

  // Phase-field fronts are ~1e-2 wide, so convergence is tested at the
  // resolution the datasets actually use (solve at 256) against its
  // refinement.
  GrfSampler s;
  s.lo = -1.0;
  s.length = 2.0;
  Rng rng(32);
  const GrfSample f = fbh::sample_grf(s, rng);
  SpectralConfig coarse;
  coarse.dt = 2e-4;
  coarse.n_snapshots = 11;
  const ReferenceSolution rc = fbh::allen_cahn_reference(
      f.eval(fbh::linspace(-1.0, 1.0 - 2.0 / 256, 256)), -1.0, 2.0, coarse);
  SpectralConfig fine = coarse;
  fine.dt = 1e-4;
  const ReferenceSolution rf = fbh::allen_cahn_reference(
      f.eval(fbh::linspace(-1.0, 1.0 - 2.0 / 512, 512)), -1.0, 2.0, fine);
  double worst = 0.0;
  for (int j = 0; j < rc.t.size(); ++j)
    for (int i = 0; i < 256; ++i) worst = std::max(worst, std::abs(rc.u(i, j) - rf.u(2 * i, j)));
  CHECK(worst < 1e-4);
}

TEST_CASE("blow-up is reported instead of returning garbage") {
  // Amplitude far outside the stable explicit-step regime for the cubic
  // reaction term.
  const Eigen::VectorXd huge = Eigen::VectorXd::Constant(64, 150.0);
  SpectralConfig cfg;
  cfg.dt = 5e-3;
  cfg.n_snapshots = 5;
  CHECK_THROWS_AS(fbh::allen_cahn_reference(huge, -1.0, 2.0, cfg), fbh::InstabilityError);
}

TEST_CASE("random-field spectrum matches its target within 15% over 2000 samples") {
  GrfSampler s;
  Rng rng(4242);
  const int draws = 2000;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(9);
  for (int d = 0; d < draws; ++d) {
    const GrfSample f = fbh::sample_grf(s, rng);
    for (int k = 0; k <= 8; ++k) acc[k] += std::norm(f.coef[k]);
  }
  for (int k = 0; k <= 8; ++k) {
    const double want = fbh::grf_mode_variance(s, k);
    CHECK(acc[k] / draws == doctest::Approx(want).epsilon(0.15));
  }
}

TEST_CASE("random-field sample mean is statistically centered on zero") {
  GrfSampler s;
  Rng rng(555);
  const int draws = 1000;
  double mean_acc = 0.0, var_acc = 0.0;
  for (int d = 0; d < draws; ++d) {
    const GrfSample f = fbh::sample_grf(s, rng);
    const double m = f.grid.mean();
    mean_acc += m;
    var_acc += m * m;
  }
  const double pooled_sd = std::sqrt(var_acc / draws);
  CHECK(std::abs(mean_acc / draws) < 3.0 * pooled_sd / std::sqrt(double(draws)));
}

TEST_CASE("error metrics behave like norms") {
  Eigen::MatrixXd truth(1, 4), pred(1, 4);
  truth << 1, 1, 1, 1;
  pred << 2, 2, 2, 2;
  CHECK(fbh::rel_l2(pred, truth) == doctest::Approx(1.0));
  CHECK(fbh::rel_l2(Eigen::MatrixXd::Zero(1, 4), truth) == doctest::Approx(1.0));
  CHECK(fbh::mae(pred, truth) == doctest::Approx(1.0));
  Eigen::MatrixXd off(1, 4);
  off << 1.5, 1.5, 1.5, 1.5;
  CHECK(fbh::mae(off, truth) == doctest::Approx(0.5));
  Eigen::MatrixXd t2(1, 2), p2(1, 2);
  t2 << 1, 1;
  p2 << 0, 2;
  CHECK(fbh::rel_l2(p2, t2) == doctest::Approx(1.0));
  CHECK(fbh::rel_l2(t2, t2) == 0.0);
  CHECK_THROWS_AS(fbh::rel_l2(Eigen::MatrixXd::Zero(1, 3), Eigen::MatrixXd::Zero(1, 4)),
                  std::invalid_argument);
  CHECK_THROWS_AS(fbh::rel_l2(t2, Eigen::MatrixXd::Zero(1, 2)), std::invalid_argument);
}

}  // TEST_SUITE
