#include <cmath>
#include <vector>

#include "doctest.h"
#include "fbh/jet.hpp"
#include "fbh/mlp.hpp"
#include "fbh/rng.hpp"
#include "fbh/tape.hpp"

using fbh::Activation;
using fbh::FlatParams;
using fbh::Jet2;
using fbh::JetBatch;
using fbh::MLPSpec;
using fbh::mlp_spec;
using fbh::NodeRef;
using fbh::Rng;
using fbh::Tape;

namespace {

std::span<const double> full_span(const FlatParams& p) {
  return {p.values.data(), static_cast<size_t>(p.values.size())};
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("parameter counts for the standard shapes") {
  CHECK(fbh::param_count(mlp_spec(1, {16, 16}, 1, Activation::kTanh)) == 321);
  CHECK(fbh::param_count(mlp_spec(2, {16, 16}, 1, Activation::kTanh)) == 337);
  std::vector<int> six_twelves(6, 12);
  CHECK(fbh::param_count(mlp_spec(4, six_twelves, 337, Activation::kRelu)) == 5221);
}

TEST_CASE("layer offsets walk the row-major weight+bias layout") {
  const MLPSpec spec = mlp_spec(1, {16, 16}, 1, Activation::kTanh);
  CHECK(fbh::layer_offset(spec, 0) == 0);
  CHECK(fbh::layer_offset(spec, 1) == 16 * 1 + 16);
  CHECK(fbh::layer_offset(spec, 2) == 32 + 16 * 16 + 16);
  CHECK(fbh::layer_offset(spec, 2) + 16 + 1 == fbh::param_count(spec));
}

TEST_CASE("validate rejects degenerate shapes") {
  CHECK_THROWS_AS(mlp_spec(0, {4}, 1, Activation::kTanh).validate(), std::invalid_argument);
  CHECK_THROWS_AS(mlp_spec(1, {}, 1, Activation::kTanh).validate(), std::invalid_argument);
  CHECK_THROWS_AS(mlp_spec(1, {4, 0}, 1, Activation::kTanh).validate(), std::invalid_argument);
}

TEST_CASE("init is deterministic per seed, biases zero, weight spread Glorot") {
  const MLPSpec spec = mlp_spec(8, {64, 64}, 4, Activation::kTanh);
  const FlatParams a = fbh::init_params(spec, 21);
  const FlatParams b = fbh::init_params(spec, 21);
  CHECK(a.values == b.values);
  const FlatParams c = fbh::init_params(spec, 22);
  CHECK(a.values != c.values);

  for (int l = 0; l < spec.n_layers(); ++l) {
    const long off = fbh::layer_offset(spec, l);
    const int fi = spec.fan_in(l), fo = spec.fan_out(l);
    for (int i = 0; i < fo; ++i) CHECK(a.values[off + fi * fo + i] == 0.0);
  }
  // Width-64 hidden layer: empirical weight variance within 20% of
  // 2/(fan_in+fan_out), the variance of the Glorot-uniform distribution.
  const long off = fbh::layer_offset(spec, 1);
  const int n = 64 * 64;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    s += a.values[off + i];
    s2 += a.values[off + i] * a.values[off + i];
  }
  const double var = s2 / n - (s / n) * (s / n);
  CHECK(var == doctest::Approx(2.0 / (64 + 64)).epsilon(0.2));
}

TEST_CASE("all-zero parameters produce the zero function") {
  const MLPSpec spec = mlp_spec(2, {8, 8}, 3, Activation::kTanh);
  const std::vector<double> zeros(fbh::param_count(spec), 0.0);
  Eigen::VectorXd x(2);
  x << 0.7, -1.3;
  const Eigen::VectorXd y = fbh::mlp_apply(spec, zeros, x);
  CHECK(y.norm() == 0.0);
}

TEST_CASE("hand-set single tanh unit reproduces tanh") {
  const MLPSpec spec = mlp_spec(1, {1}, 1, Activation::kTanh);
  // Layout: [w1, b1, w2, b2] -> tanh(w1*x + b1)*w2 + b2.
  const std::vector<double> params = {1.0, 0.0, 1.0, 0.0};
  Eigen::VectorXd x(1);
  x << 0.0;
  CHECK(fbh::mlp_apply(spec, params, x)[0] == 0.0);
  x << 0.5;
  CHECK(fbh::mlp_apply(spec, params, x)[0] == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
}

TEST_CASE("batched eval matches per-point apply") {
  const MLPSpec spec = mlp_spec(3, {10, 10}, 2, Activation::kTanh);
  const FlatParams p = fbh::init_params(spec, 4);
  Rng rng(40);
  Eigen::MatrixXd X(3, 9);
  for (int j = 0; j < X.cols(); ++j)
    for (int i = 0; i < 3; ++i) X(i, j) = rng.uniform(-1.0, 1.0);
  const Eigen::MatrixXd Y = fbh::mlp_eval(spec, full_span(p), X);
  for (int j = 0; j < X.cols(); ++j) {
    const Eigen::VectorXd y = fbh::mlp_apply(spec, full_span(p), X.col(j));
    CHECK((Y.col(j) - y).cwiseAbs().maxCoeff() < 1e-14);
  }
  // ReLU path too.
  const MLPSpec rspec = mlp_spec(3, {10, 10}, 2, Activation::kRelu);
  const FlatParams rp = fbh::init_params(rspec, 4);
  const Eigen::MatrixXd Yr = fbh::mlp_eval(rspec, full_span(rp), X);
  for (int j = 0; j < X.cols(); ++j) {
    const Eigen::VectorXd y = fbh::mlp_apply(rspec, full_span(rp), X.col(j));
    CHECK((Yr.col(j) - y).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("jet evaluation carries exact derivatives of the network") {
  const MLPSpec spec = mlp_spec(1, {16, 16}, 1, Activation::kTanh);
  const FlatParams p = fbh::init_params(spec, 17);
  auto f = [&](double x) {
    Eigen::VectorXd v(1);
    v << x;
    return fbh::mlp_apply(spec, full_span(p), v)[0];
  };
  Rng rng(99);
  for (int i = 0; i < 20; ++i) {
    const double x = rng.uniform(-2.0, 2.0);
    const std::vector<Jet2> in = {fbh::jet_seed(x, 0, 1)};
    const std::vector<Jet2> out = fbh::mlp_apply_jet(spec, full_span(p), in);
    REQUIRE(out.size() == 1);
    CHECK(out[0].v == doctest::Approx(f(x)).epsilon(1e-14));
    const double h1 = 1e-3;
    const double fd1 = (-f(x + 2 * h1) + 8 * f(x + h1) - 8 * f(x - h1) + f(x - 2 * h1)) / (12 * h1);
    const double fd2 =
        (-f(x + 2 * h1) + 16 * f(x + h1) - 30 * f(x) + 16 * f(x - h1) - f(x - 2 * h1)) /
        (12 * h1 * h1);
    CHECK(std::abs(out[0].d1[0] - fd1) / std::max(1.0, std::abs(fd1)) < 1e-6);
    CHECK(std::abs(out[0].d2[0] - fd2) / std::max(1.0, std::abs(fd2)) < 1e-4);
  }
}

TEST_CASE("two-input jets recover the network Hessian") {
  const MLPSpec spec = mlp_spec(2, {12, 12}, 1, Activation::kTanh);
  const FlatParams p = fbh::init_params(spec, 23);
  auto f = [&](double x, double t) {
    Eigen::VectorXd v(2);
    v << x, t;
    return fbh::mlp_apply(spec, full_span(p), v)[0];
  };
  const double x = 0.37, t = 0.81, h = 1e-4;
  const std::vector<Jet2> in = {fbh::jet_seed(x, 0, 2), fbh::jet_seed(t, 1, 2)};
  const Jet2 out = fbh::mlp_apply_jet(spec, full_span(p), in)[0];
  const double mixed =
      (f(x + h, t + h) - f(x + h, t - h) - f(x - h, t + h) + f(x - h, t - h)) / (4 * h * h);
  CHECK(std::abs(out.d2_at(0, 1) - mixed) < 1e-4);
  const double dxx = (f(x + h, t) - 2 * f(x, t) + f(x - h, t)) / (h * h);
  CHECK(std::abs(out.d2_at(0, 0) - dxx) < 1e-4);
}

TEST_CASE("tape forward matches the plain forward") {
  const MLPSpec spec = mlp_spec(2, {9, 9}, 3, Activation::kTanh);
  const FlatParams p = fbh::init_params(spec, 31);
  Rng rng(32);
  Eigen::MatrixXd X(2, 6);
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 2; ++i) X(i, j) = rng.uniform(-1.0, 1.0);

  Tape tape;
  const NodeRef params = tape.leaf(p.values, true);
  const fbh::TapeMlp net = fbh::tape_mlp(tape, spec, params, 0);
  const NodeRef y = fbh::tape_mlp_eval(tape, net, tape.leaf(X));
  const Eigen::MatrixXd want = fbh::mlp_eval(spec, full_span(p), X);
  CHECK((tape.value(y) - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("tape jets match the per-point jet evaluation") {
  const MLPSpec spec = mlp_spec(2, {8, 8}, 1, Activation::kTanh);
  const FlatParams p = fbh::init_params(spec, 55);
  Rng rng(56);
  const int n = 7;
  Eigen::MatrixXd X(2, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < 2; ++i) X(i, j) = rng.uniform(-1.0, 1.0);

  Tape tape;
  const NodeRef params = tape.leaf(p.values, true);
  const fbh::TapeMlp net = fbh::tape_mlp(tape, spec, params, 0);
  JetBatch in;
  in.v = tape.leaf(X);
  // Track both coordinates: dX/dx0 = [1;0], dX/dx1 = [0;1] per column.
  Eigen::MatrixXd e0 = Eigen::MatrixXd::Zero(2, n), e1 = Eigen::MatrixXd::Zero(2, n);
  e0.row(0).setOnes();
  e1.row(1).setOnes();
  in.d1 = {tape.leaf(e0), tape.leaf(e1)};
  in.pairs = {{0, 0}, {0, 1}, {1, 1}};
  in.d2 = {NodeRef{}, NodeRef{}, NodeRef{}};  // inputs are flat in x

  const JetBatch out = fbh::tape_mlp_jet(tape, net, in);
  REQUIRE(out.d1.size() == 2);
  REQUIRE(out.d2.size() == 3);
  for (int j = 0; j < n; ++j) {
    const std::vector<Jet2> jin = {fbh::jet_seed(X(0, j), 0, 2), fbh::jet_seed(X(1, j), 1, 2)};
    const Jet2 want = fbh::mlp_apply_jet(spec, full_span(p), jin)[0];
    CHECK(tape.value(out.v)(0, j) == doctest::Approx(want.v).epsilon(1e-13));
    CHECK(tape.value(out.d1[0])(0, j) == doctest::Approx(want.d1[0]).epsilon(1e-13));
    CHECK(tape.value(out.d1[1])(0, j) == doctest::Approx(want.d1[1]).epsilon(1e-13));
    CHECK(tape.value(out.d2[0])(0, j) == doctest::Approx(want.d2_at(0, 0)).epsilon(1e-12));
    CHECK(tape.value(out.d2[1])(0, j) == doctest::Approx(want.d2_at(0, 1)).epsilon(1e-12));
    CHECK(tape.value(out.d2[2])(0, j) == doctest::Approx(want.d2_at(1, 1)).epsilon(1e-12));
  }
}

TEST_CASE("segment lookup by name throws when absent") {
  const FlatParams p = fbh::init_params(mlp_spec(1, {4}, 1, Activation::kTanh), 1);
  CHECK(p.segment("mlp").size == p.size());
  CHECK_THROWS_AS(p.segment("branch"), std::invalid_argument);
}

}  // TEST_SUITE
