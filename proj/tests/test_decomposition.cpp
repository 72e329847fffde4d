#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "fbh/decomposition.hpp"
#include "fbh/rng.hpp"

using fbh::Decomposition;
using fbh::Jet2;
using fbh::Rng;
using fbh::Subdomain;
using fbh::uniform_decomposition;

namespace {

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Decomposition sin_grid() {
  const double tp = 2 * std::numbers::pi;
  return uniform_decomposition(vec1(-tp), vec1(tp), {28}, vec1(0.94));
}

Decomposition burgers_grid() {
  return uniform_decomposition(vec2(-1, 0), vec2(1, 1), {5, 5}, vec2(0.7, 0.35));
}

Decomposition operator_grid(int nx, int nt) {
  const Eigen::VectorXd lo = vec2(-1, 0), hi = vec2(1, 1);
  Eigen::VectorXd widths(2);
  widths << 1.8 * 2.0 / nx, 1.8 * 1.0 / nt;
  return uniform_decomposition(lo, hi, {nx, nt}, widths);
}

Eigen::VectorXd random_point(const Decomposition& dec, Rng& rng) {
  Eigen::VectorXd x(dec.dim());
  for (int d = 0; d < dec.dim(); ++d) x[d] = rng.uniform(dec.lo[d], dec.hi[d]);
  return x;
}

double pou_error(const Decomposition& dec, const Eigen::VectorXd& x) {
  double sum = 0.0;
  for (int j = 0; j < dec.J(); ++j) sum += fbh::window(dec, j, x);
  return std::abs(sum - 1.0);
}

}  // namespace

TEST_SUITE("decomposition") {

TEST_CASE("grids have the expected size and layout") {
  const Decomposition d1 = sin_grid();
  CHECK(d1.J() == 28);
  const double spacing = 4 * std::numbers::pi / 28;
  CHECK(d1.subs[0].m[0] == doctest::Approx(-2 * std::numbers::pi + 0.5 * spacing));
  CHECK(d1.subs[0].s[0] == doctest::Approx(0.47));
  CHECK(d1.subs[27].m[0] == doctest::Approx(2 * std::numbers::pi - 0.5 * spacing));

  const Decomposition d2 = burgers_grid();
  CHECK(d2.J() == 25);
  // First dimension outermost: index j = ix * 5 + it.
  CHECK((d2.subs[0].m - vec2(-0.8, 0.1)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((d2.subs[1].m - vec2(-0.8, 0.3)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((d2.subs[5].m - vec2(-0.4, 0.1)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((d2.subs[0].s - vec2(0.35, 0.175)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("single-subdomain decomposition covers everything with weight one") {
  const Decomposition d = uniform_decomposition(vec1(0), vec1(1), {1}, vec1(1.4));
  CHECK(d.J() == 1);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(0.0, 1.0);
    CHECK(fbh::window(d, 0, vec1(x)) == 1.0);
  }
}

TEST_CASE("subdomains must overlap: widths at or below the spacing are rejected") {
  CHECK_THROWS_AS(uniform_decomposition(vec1(0), vec1(1), {4}, vec1(0.25)),
                  std::invalid_argument);
  CHECK_THROWS_AS(uniform_decomposition(vec1(0), vec1(1), {4}, vec1(0.2)),
                  std::invalid_argument);
  CHECK_NOTHROW(uniform_decomposition(vec1(0), vec1(1), {4}, vec1(0.26)));
}

TEST_CASE("raw window is 1 at the midpoint, 0 at the bounds, 0.5 halfway") {
  Subdomain sub{vec1(0.0), vec1(1.0)};
  CHECK(fbh::window_raw(sub, vec1(0.0)) == 1.0);
  CHECK(fbh::window_raw(sub, vec1(1.0)) == 0.0);
  CHECK(fbh::window_raw(sub, vec1(-1.0)) == 0.0);
  CHECK(fbh::window_raw(sub, vec1(2.3)) == 0.0);
  CHECK(fbh::window_raw(sub, vec1(0.5)) == doctest::Approx(0.5).epsilon(1e-15));

  Subdomain sub2{vec2(0.5, 0.25), vec2(0.5, 0.1)};
  CHECK(fbh::window_raw(sub2, vec2(0.5, 0.25)) == 1.0);
  CHECK(fbh::window_raw(sub2, vec2(1.0, 0.25)) == 0.0);   // on a bound in x
  CHECK(fbh::window_raw(sub2, vec2(0.5, 0.36)) == 0.0);   // outside in t
  // Product structure across dimensions.
  const double wx = fbh::window_raw(Subdomain{vec1(0.5), vec1(0.5)}, vec1(0.7));
  const double wt = fbh::window_raw(Subdomain{vec1(0.25), vec1(0.1)}, vec1(0.3));
  CHECK(fbh::window_raw(sub2, vec2(0.7, 0.3)) == doctest::Approx(wx * wt).epsilon(1e-15));
}

TEST_CASE("normalized windows form a partition of unity to 1e-12 at 10^4 points") {
  const std::vector<Decomposition> grids = {
      sin_grid(),          burgers_grid(),      operator_grid(2, 2),
      operator_grid(4, 2), operator_grid(4, 4), operator_grid(8, 4),
      uniform_decomposition(vec1(0), vec1(1), {12}, vec1(1.8 / 12.0))};
  Rng rng(99);
  for (const Decomposition& dec : grids) {
    double worst = 0.0;
    const int n = 10000 / static_cast<int>(grids.size()) + 1500;
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, pou_error(dec, random_point(dec, rng)));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("windows vanish identically outside their subdomain") {
  const Decomposition dec = sin_grid();
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const Eigen::VectorXd x = random_point(dec, rng);
    for (int j = 0; j < dec.J(); ++j) {
      if (std::abs(x[0] - dec.subs[j].m[0]) >= dec.subs[j].s[0])
        CHECK(fbh::window(dec, j, x) == 0.0);
    }
  }
}

TEST_CASE("uncovered points are a domain error") {
  const Decomposition dec = sin_grid();
  CHECK_THROWS_AS(fbh::window(dec, 0, vec1(8.0)), std::domain_error);
  // Just outside the domain but inside the first subdomain's support is fine.
  const double edge = -2 * std::numbers::pi - 0.1;
  CHECK(fbh::window(dec, 0, vec1(edge)) == 1.0);
}

TEST_CASE("two equal neighbors split the overlap midpoint evenly") {
  const Decomposition dec = uniform_decomposition(vec1(0), vec1(1), {2}, vec1(0.9));
  const double mid = 0.5;
  CHECK(fbh::window(dec, 0, vec1(mid)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(fbh::window(dec, 1, vec1(mid)) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("input normalization maps the subdomain onto [-1, 1]") {
  Subdomain sub{vec1(0.5), vec1(0.25)};
  CHECK(fbh::normalize_input(sub, vec1(0.5))[0] == 0.0);
  CHECK(fbh::normalize_input(sub, vec1(0.75))[0] == 1.0);
  CHECK(fbh::normalize_input(sub, vec1(0.25))[0] == -1.0);
  CHECK(fbh::normalize_input(sub, vec1(0.625))[0] == 0.5);
  Subdomain sub2{vec2(0.0, 0.5), vec2(2.0, 0.5)};
  CHECK(fbh::normalize_input(sub2, vec2(1.0, 0.75)) == vec2(0.5, 0.5));
}

TEST_CASE("task vector concatenates midpoint then half-width") {
  Subdomain sub{vec1(0.5), vec1(0.25)};
  Eigen::VectorXd t = fbh::subdomain_task(sub);
  REQUIRE(t.size() == 2);
  CHECK(t[0] == 0.5);
  CHECK(t[1] == 0.25);
  Subdomain sub2{vec2(0.0, 0.5), vec2(0.35, 0.1)};
  Eigen::VectorXd t2 = fbh::subdomain_task(sub2);
  REQUIRE(t2.size() == 4);
  CHECK(t2 == (Eigen::VectorXd(4) << 0.0, 0.5, 0.35, 0.1).finished());
}

TEST_CASE("active_subdomains lists exactly the covering windows in order") {
  const Decomposition dec = burgers_grid();
  Rng rng(31);
  for (int i = 0; i < 500; ++i) {
    const Eigen::VectorXd x = random_point(dec, rng);
    const std::vector<int> active = fbh::active_subdomains(dec, x);
    CHECK(!active.empty());
    int prev = -1;
    for (int j : active) {
      CHECK(j > prev);
      prev = j;
      CHECK(fbh::window_raw(dec.subs[j], x) > 0.0);
    }
    double sum = 0.0;
    for (int j : active) sum += fbh::window(dec, j, x);
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  // A domain corner lies inside exactly one subdomain.
  CHECK(fbh::active_subdomains(dec, vec2(-1.0, 0.0)) == std::vector<int>{0});
}

TEST_CASE("window jets carry finite-difference-accurate derivatives") {
  const Decomposition dec = sin_grid();
  Rng rng(44);
  const std::array<int, 1> tracked = {0};
  for (int i = 0; i < 60; ++i) {
    const Eigen::VectorXd x = random_point(dec, rng);
    const std::vector<int> active = fbh::active_subdomains(dec, x);
    const std::vector<Jet2> xj = fbh::jet_lift(x, tracked);
    const std::vector<Jet2> w = fbh::window_jets(dec, active, xj);
    REQUIRE(w.size() == active.size());
    const double h = 1e-5;
    for (size_t k = 0; k < active.size(); ++k) {
      const int j = active[k];
      CHECK(w[k].v == doctest::Approx(fbh::window(dec, j, x)).epsilon(1e-14));
      // Skip points whose FD stencil crosses a support edge.
      if (std::abs(std::abs(x[0] - dec.subs[j].m[0]) - dec.subs[j].s[0]) < 2 * h) continue;
      const double wp = fbh::window(dec, j, vec1(x[0] + h));
      const double wm = fbh::window(dec, j, vec1(x[0] - h));
      CHECK(w[k].d1[0] == doctest::Approx((wp - wm) / (2 * h)).epsilon(1e-5));
      const double w0 = fbh::window(dec, j, x);
      CHECK(w[k].d2[0] ==
            doctest::Approx((wp - 2 * w0 + wm) / (h * h)).epsilon(2e-4).scale(1.0));
    }
  }
}

TEST_CASE("2-D window jets match finite differences including mixed partials") {
  const Decomposition dec = burgers_grid();
  Rng rng(45);
  const std::array<int, 2> tracked = {0, 1};
  int tested = 0;
  for (int i = 0; i < 60 && tested < 30; ++i) {
    const Eigen::VectorXd x = random_point(dec, rng);
    const std::vector<int> active = fbh::active_subdomains(dec, x);
    const std::vector<Jet2> xj = fbh::jet_lift(x, tracked);
    const std::vector<Jet2> w = fbh::window_jets(dec, active, xj);
    const double h = 1e-5;
    for (size_t k = 0; k < active.size(); ++k) {
      const int j = active[k];
      bool near_edge = false;
      for (int d = 0; d < 2; ++d)
        if (std::abs(std::abs(x[d] - dec.subs[j].m[d]) - dec.subs[j].s[d]) < 2 * h)
          near_edge = true;
      if (near_edge) continue;
      auto wj = [&](double a, double b) { return fbh::window(dec, j, vec2(a, b)); };
      const double dx = (wj(x[0] + h, x[1]) - wj(x[0] - h, x[1])) / (2 * h);
      const double dt = (wj(x[0], x[1] + h) - wj(x[0], x[1] - h)) / (2 * h);
      const double dxt = (wj(x[0] + h, x[1] + h) - wj(x[0] + h, x[1] - h) -
                          wj(x[0] - h, x[1] + h) + wj(x[0] - h, x[1] - h)) /
                         (4 * h * h);
      CHECK(w[k].d1[0] == doctest::Approx(dx).epsilon(1e-5).scale(1.0));
      CHECK(w[k].d1[1] == doctest::Approx(dt).epsilon(1e-5).scale(1.0));
      CHECK(w[k].d2_at(0, 1) == doctest::Approx(dxt).epsilon(2e-4).scale(1.0));
      ++tested;
    }
  }
  CHECK(tested >= 30);
}

TEST_CASE("raw window derivative fades to zero at the support edge") {
  Subdomain sub{vec1(0.0), vec1(1.0)};
  const std::array<int, 1> tracked = {0};
  for (double x : {-0.999999, 0.999999}) {
    const std::vector<Jet2> xj = fbh::jet_lift(vec1(x), tracked);
    const Jet2 w = fbh::window_raw_jet(sub, xj);
    CHECK(std::abs(w.d1[0]) < 1e-5);  // continuous first derivative at the edge
  }
  const std::vector<Jet2> mid = fbh::jet_lift(vec1(0.0), tracked);
  CHECK(fbh::window_raw_jet(sub, mid).d1[0] == 0.0);
}

}  // TEST_SUITE
