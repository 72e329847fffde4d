#include <cmath>
#include <vector>

#include "doctest.h"
#include "fbh/hypernet.hpp"
#include "fbh/rng.hpp"
#include "fbh/tape.hpp"

using fbh::Activation;
using fbh::ChunkedHypernetSpec;
using fbh::chunked_hypernet;
using fbh::FlatParams;
using fbh::NodeRef;
using fbh::Rng;
using fbh::Tape;

namespace {

std::span<const double> full_span(const FlatParams& p) {
  return {p.values.data(), static_cast<size_t>(p.values.size())};
}

Eigen::VectorXd random_task(int n, Rng& rng) {
  Eigen::VectorXd t(n);
  for (int i = 0; i < n; ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_SUITE("hypernet") {

TEST_CASE("chunk arithmetic: 321 target params over 6 chunks means chunks of 54") {
  const ChunkedHypernetSpec spec = chunked_hypernet(2, {16, 16}, 321, 6);
  CHECK(spec.chunk_size == 54);
  CHECK(spec.emb_dim == 6);
  CHECK(spec.n_chunks == 6);
  CHECK(spec.target_params == 321);
  // Body eats [task ; embedding] and emits one chunk.
  CHECK(spec.body.input_dim == 2 + 6);
  CHECK(spec.body.output_dim == 54);
  CHECK(spec.body.activation == Activation::kRelu);
  // 6 chunks of 54 = 324 raw outputs, truncated to 321.
  CHECK(spec.n_chunks * spec.chunk_size >= spec.target_params);
}

TEST_CASE("non-chunked mode drops the embedding and emits all parameters at once") {
  const ChunkedHypernetSpec spec = chunked_hypernet(2, {16, 16}, 321, 1);
  CHECK(spec.emb_dim == 0);
  CHECK(spec.chunk_size == 321);
  CHECK(spec.body.input_dim == 2);
  CHECK(spec.body.output_dim == 321);
  CHECK(fbh::hyper_param_count(spec) == fbh::param_count(spec.body));
}

TEST_CASE("hyper parameter count is body plus chunk embeddings") {
  const ChunkedHypernetSpec spec = chunked_hypernet(3, {12, 12}, 100, 4);
  CHECK(fbh::hyper_param_count(spec) ==
        fbh::param_count(spec.body) + 4L * spec.emb_dim);
  CHECK(fbh::embedding_offset(spec, 0) == fbh::param_count(spec.body));
  CHECK(fbh::embedding_offset(spec, 3) == fbh::param_count(spec.body) + 3L * spec.emb_dim);
}

TEST_CASE("generated vector has target length and responds to the task") {
  const ChunkedHypernetSpec spec = chunked_hypernet(2, {16, 16}, 321, 6);
  const FlatParams hp = fbh::init_hyper_params(spec, 7);
  Rng rng(70);
  const Eigen::VectorXd t1 = random_task(2, rng);
  const Eigen::VectorXd t2 = random_task(2, rng);
  const Eigen::VectorXd p1 = fbh::generate_params(spec, full_span(hp), t1);
  const Eigen::VectorXd p2 = fbh::generate_params(spec, full_span(hp), t2);
  CHECK(p1.size() == 321);
  CHECK((p1 - p2).norm() > 0.0);
  // Deterministic per (params, task).
  CHECK(fbh::generate_params(spec, full_span(hp), t1) == p1);
}

TEST_CASE("zero body weights generate the zero parameter vector") {
  const ChunkedHypernetSpec spec = chunked_hypernet(2, {8, 8}, 50, 3);
  FlatParams hp = fbh::init_hyper_params(spec, 1);
  hp.values.head(fbh::param_count(spec.body)).setZero();  // embeddings stay
  Rng rng(2);
  const Eigen::VectorXd p = fbh::generate_params(spec, full_span(hp), random_task(2, rng));
  CHECK(p.norm() == 0.0);
}

TEST_CASE("embeddings are standard normal and distinct per chunk") {
  const ChunkedHypernetSpec spec = chunked_hypernet(2, {8}, 400, 8);
  const FlatParams hp = fbh::init_hyper_params(spec, 3);
  const long body_n = fbh::param_count(spec.body);
  // Body biases are zero but embeddings must not be.
  Eigen::VectorXd e0 = hp.values.segment(fbh::embedding_offset(spec, 0), spec.emb_dim);
  Eigen::VectorXd e1 = hp.values.segment(fbh::embedding_offset(spec, 1), spec.emb_dim);
  CHECK(e0.norm() > 0.0);
  CHECK((e0 - e1).norm() > 0.0);
  CHECK(hp.size() == body_n + 8L * spec.emb_dim);
  // Pooled spread of all embedding entries is roughly unit.
  const Eigen::VectorXd all = hp.values.tail(8L * spec.emb_dim);
  const double var = all.squaredNorm() / all.size();
  CHECK(var > 0.4);
  CHECK(var < 2.5);
}

TEST_CASE("chunks are truncated, not wrapped: last chunk supplies the tail") {
  // 50 params over 3 chunks -> chunk 17, raw 51, truncated by 1.
  const ChunkedHypernetSpec spec = chunked_hypernet(1, {6}, 50, 3);
  CHECK(spec.chunk_size == 17);
  const FlatParams hp = fbh::init_hyper_params(spec, 11);
  Eigen::VectorXd task(1);
  task << 0.4;
  const Eigen::VectorXd p = fbh::generate_params(spec, full_span(hp), task);
  REQUIRE(p.size() == 50);
  // Recompute chunk by chunk through the body directly.
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd in(1 + spec.emb_dim);
    in << task, hp.values.segment(fbh::embedding_offset(spec, c), spec.emb_dim);
    const Eigen::VectorXd chunk =
        fbh::mlp_apply(spec.body, full_span(hp).subspan(0, fbh::param_count(spec.body)), in);
    const int take = std::min<int>(17, 50 - c * 17);
    CHECK((p.segment(c * 17, take) - chunk.head(take)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("dual merge multiplies chunks elementwise") {
  const ChunkedHypernetSpec op = chunked_hypernet(5, {10, 10}, 60, 4);
  const ChunkedHypernetSpec dom = chunked_hypernet(2, {6}, 60, 4);
  const FlatParams op_p = fbh::init_hyper_params(op, 21);
  const FlatParams dom_p = fbh::init_hyper_params(dom, 22);
  Rng rng(23);
  const Eigen::VectorXd a = random_task(5, rng);
  const Eigen::VectorXd sub = random_task(2, rng);

  const Eigen::VectorXd merged =
      fbh::dual_generate(op, dom, full_span(op_p), full_span(dom_p), a, sub);
  REQUIRE(merged.size() == 60);

  // Manual recomputation chunk by chunk.
  for (int c = 0; c < 4; ++c) {
    Eigen::VectorXd in_o(5 + op.emb_dim), in_d(2 + dom.emb_dim);
    in_o << a, op_p.values.segment(fbh::embedding_offset(op, c), op.emb_dim);
    in_d << sub, dom_p.values.segment(fbh::embedding_offset(dom, c), dom.emb_dim);
    const Eigen::VectorXd co =
        fbh::mlp_apply(op.body, full_span(op_p).subspan(0, fbh::param_count(op.body)), in_o);
    const Eigen::VectorXd cd =
        fbh::mlp_apply(dom.body, full_span(dom_p).subspan(0, fbh::param_count(dom.body)), in_d);
    const int take = std::min<int>(op.chunk_size, 60 - c * op.chunk_size);
    if (take <= 0) break;
    const Eigen::VectorXd want = co.head(take).cwiseProduct(cd.head(take));
    CHECK((merged.segment(c * op.chunk_size, take) - want).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("dual merge with a unit domain branch reduces to the operator branch") {
  const ChunkedHypernetSpec op = chunked_hypernet(4, {10, 10}, 80, 4);
  const ChunkedHypernetSpec dom = chunked_hypernet(2, {6}, 80, 4);
  const FlatParams op_p = fbh::init_hyper_params(op, 31);
  FlatParams dom_p = fbh::init_hyper_params(dom, 32);
  // Rig h_D to emit ones for every input: zero all weights, set the output
  // bias of the body's last layer to 1.
  dom_p.values.setZero();
  const long last = fbh::layer_offset(dom.body, dom.body.n_layers() - 1);
  const int fi = dom.body.fan_in(dom.body.n_layers() - 1);
  const int fo = dom.body.fan_out(dom.body.n_layers() - 1);
  for (int i = 0; i < fo; ++i) dom_p.values[last + static_cast<long>(fi) * fo + i] = 1.0;

  Rng rng(33);
  const Eigen::VectorXd a = random_task(4, rng);
  const Eigen::VectorXd sub = random_task(2, rng);
  const Eigen::VectorXd merged =
      fbh::dual_generate(op, dom, full_span(op_p), full_span(dom_p), a, sub);
  const Eigen::VectorXd solo = fbh::generate_params(op, full_span(op_p), a);
  CHECK((merged - solo).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero operator branch makes the dual output vanish") {
  const ChunkedHypernetSpec op = chunked_hypernet(4, {8}, 40, 2);
  const ChunkedHypernetSpec dom = chunked_hypernet(2, {8}, 40, 2);
  FlatParams op_p = fbh::init_hyper_params(op, 41);
  const FlatParams dom_p = fbh::init_hyper_params(dom, 42);
  op_p.values.head(fbh::param_count(op.body)).setZero();
  Rng rng(43);
  const Eigen::VectorXd merged = fbh::dual_generate(op, dom, full_span(op_p), full_span(dom_p),
                                                    random_task(4, rng), random_task(2, rng));
  CHECK(merged.norm() == 0.0);
}

TEST_CASE("mismatched chunk geometry is rejected") {
  const ChunkedHypernetSpec op = chunked_hypernet(4, {8}, 40, 2);
  const ChunkedHypernetSpec dom = chunked_hypernet(2, {8}, 40, 4);
  const FlatParams op_p = fbh::init_hyper_params(op, 1);
  const FlatParams dom_p = fbh::init_hyper_params(dom, 2);
  Rng rng(3);
  CHECK_THROWS_AS(fbh::dual_generate(op, dom, full_span(op_p), full_span(dom_p),
                                     random_task(4, rng), random_task(2, rng)),
                  std::invalid_argument);
}

TEST_CASE("tape generation matches the plain path bit for bit") {
  const ChunkedHypernetSpec spec = chunked_hypernet(3, {14, 14}, 120, 5);
  const FlatParams hp = fbh::init_hyper_params(spec, 51);
  Rng rng(52);
  const Eigen::VectorXd task = random_task(3, rng);

  Tape tape;
  const NodeRef leaf = tape.leaf(hp.values, true);
  const fbh::TapeHypernet net = fbh::tape_hypernet(tape, spec, leaf, 0);
  const NodeRef gen = fbh::tape_generate(tape, net, tape.leaf(task));
  const Eigen::VectorXd want = fbh::generate_params(spec, full_span(hp), task);
  CHECK((tape.value(gen).col(0) - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("tape dual generation matches the plain dual path") {
  const ChunkedHypernetSpec op = chunked_hypernet(5, {12}, 90, 3);
  const ChunkedHypernetSpec dom = chunked_hypernet(2, {6}, 90, 3);
  const FlatParams op_p = fbh::init_hyper_params(op, 61);
  const FlatParams dom_p = fbh::init_hyper_params(dom, 62);
  Rng rng(63);
  const Eigen::VectorXd a = random_task(5, rng);
  const Eigen::VectorXd sub = random_task(2, rng);

  Tape tape;
  Eigen::VectorXd both(op_p.size() + dom_p.size());
  both << op_p.values, dom_p.values;
  const NodeRef leaf = tape.leaf(both, true);
  const fbh::TapeHypernet op_net = fbh::tape_hypernet(tape, op, leaf, 0);
  const fbh::TapeHypernet dom_net = fbh::tape_hypernet(tape, dom, leaf, op_p.size());
  const NodeRef gen =
      fbh::tape_dual_generate(tape, op_net, dom_net, tape.leaf(a), tape.leaf(sub));
  const Eigen::VectorXd want =
      fbh::dual_generate(op, dom, full_span(op_p), full_span(dom_p), a, sub);
  CHECK((tape.value(gen).col(0) - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gradients reach both the body weights and the embeddings") {
  const ChunkedHypernetSpec spec = chunked_hypernet(2, {6}, 30, 3);
  const FlatParams hp = fbh::init_hyper_params(spec, 71);
  Rng rng(72);
  const Eigen::VectorXd task = random_task(2, rng);

  auto loss_of = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* g) {
    Tape tape;
    const NodeRef leaf = tape.leaf(theta, true);
    const fbh::TapeHypernet net = fbh::tape_hypernet(tape, spec, leaf, 0);
    const NodeRef gen = fbh::tape_generate(tape, net, tape.leaf(task));
    const NodeRef loss = tape.sum_all(tape.square(gen));
    if (g) {
      tape.backward(loss);
      *g = tape.grad(leaf);
    }
    return tape.value(loss)(0, 0);
  };

  Eigen::VectorXd g;
  loss_of(hp.values, &g);
  REQUIRE(g.size() == hp.size());
  // Embedding block must carry signal (ReLU body may still zero a few).
  CHECK(g.tail(3L * spec.emb_dim).norm() > 0.0);
  const double h = 1e-6;
  int checked = 0;
  for (long i = 0; i < hp.size(); i += std::max<long>(1, hp.size() / 25)) {
    Eigen::VectorXd tp = hp.values, tm = hp.values;
    tp[i] += h;
    tm[i] -= h;
    const double fd = (loss_of(tp, nullptr) - loss_of(tm, nullptr)) / (2 * h);
    CHECK(std::abs(g[i] - fd) / std::max(1.0, std::abs(fd)) < 1e-5);
    ++checked;
  }
  CHECK(checked >= 20);
}

}  // TEST_SUITE
