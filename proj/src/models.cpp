#include "fbh/models.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace fbh {
namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::vector<int> all_dirs(int d) {
  std::vector<int> t(d);
  std::iota(t.begin(), t.end(), 0);
  return t;
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<size_t>(v.size())};
}

// Concatenated single-hypernet operator task [a; m; s].
Eigen::VectorXd op_task(const Eigen::VectorXd& a, const Subdomain& sub) {
  Eigen::VectorXd t(a.size() + 2 * sub.dim());
  t << a, sub.m, sub.s;
  return t;
}

void check(const FbPinnModel& m) {
  require(m.subnet.input_dim == m.dec.dim() && m.subnet.output_dim == 1,
          "FbPinnModel: subnet must map the domain dimension to a scalar");
}

void check(const FbHyPinnModel& m) {
  require(m.target.input_dim == m.dec.dim() && m.target.output_dim == 1,
          "FbHyPinnModel: target must map the domain dimension to a scalar");
  require(m.hyper.n_chunks == 1, "FbHyPinnModel: hypernetwork must be non-chunked");
  require(m.hyper.task_dim == 2 * m.dec.dim(),
          "FbHyPinnModel: hypernetwork task must be [m; s]");
  require(m.hyper.target_params == param_count(m.target),
          "FbHyPinnModel: hypernetwork output size must match the target net");
}

void check(const DeepOnetModel& m) {
  require(m.branch.output_dim == m.trunk.output_dim,
          "DeepOnetModel: branch and trunk must share the latent dimension");
  require(m.trunk.output_dim >= 1, "DeepOnetModel: latent dimension must be positive");
}

void check(const HyperDeepOnetModel& m) {
  require(m.target.output_dim == 1, "HyperDeepOnetModel: target output must be scalar");
  require(m.hyper.target_params == param_count(m.target),
          "HyperDeepOnetModel: hypernetwork output size must match the target net");
}

void check(const FbHyDonModel& m) {
  require(m.target.input_dim == m.dec.dim() && m.target.output_dim == 1,
          "FbHyDonModel: target must map the domain dimension to a scalar");
  require(m.op_hyper.target_params == param_count(m.target),
          "FbHyDonModel: hypernetwork output size must match the target net");
  if (m.dual) {
    require(m.dom_hyper.task_dim == 2 * m.dec.dim(),
            "FbHyDonModel: domain hypernetwork task must be [m; s]");
    require(m.dom_hyper.target_params == m.op_hyper.target_params &&
                m.dom_hyper.n_chunks == m.op_hyper.n_chunks,
            "FbHyDonModel: dual hypernetworks must share chunk geometry");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Counts and initialization

long model_param_count(const FbPinnModel& m) { return m.dec.J() * param_count(m.subnet); }
long model_param_count(const FbHyPinnModel& m) { return hyper_param_count(m.hyper); }
long model_param_count(const DeepOnetModel& m) {
  return param_count(m.branch) + param_count(m.trunk) + 1;
}
long model_param_count(const HyperDeepOnetModel& m) { return hyper_param_count(m.hyper); }
long model_param_count(const FbHyDonModel& m) {
  return hyper_param_count(m.op_hyper) + (m.dual ? hyper_param_count(m.dom_hyper) : 0);
}

FlatParams model_init(const FbPinnModel& m, std::uint64_t seed) {
  check(m);
  const long pc = param_count(m.subnet);
  FlatParams p;
  p.values.resize(m.dec.J() * pc);
  for (int j = 0; j < m.dec.J(); ++j) {
    p.segments.push_back({"sub_" + std::to_string(j), j * pc, pc});
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(j));
    fill_glorot(m.subnet, rng, {p.values.data() + j * pc, static_cast<size_t>(pc)});
  }
  return p;
}

FlatParams model_init(const FbHyPinnModel& m, std::uint64_t seed) {
  check(m);
  const long pc = hyper_param_count(m.hyper);
  FlatParams p;
  p.values.resize(pc);
  p.segments.push_back({"hyper", 0, pc});
  Rng rng = Rng::substream(seed, 0);
  fill_hyper_params(m.hyper, rng, {p.values.data(), static_cast<size_t>(pc)});
  return p;
}

FlatParams model_init(const DeepOnetModel& m, std::uint64_t seed) {
  check(m);
  const long pb = param_count(m.branch), pt = param_count(m.trunk);
  FlatParams p;
  p.values.resize(pb + pt + 1);
  p.segments.push_back({"branch", 0, pb});
  p.segments.push_back({"trunk", pb, pt});
  p.segments.push_back({"bias", pb + pt, 1});
  Rng rb = Rng::substream(seed, 0);
  fill_glorot(m.branch, rb, {p.values.data(), static_cast<size_t>(pb)});
  Rng rt = Rng::substream(seed, 1);
  fill_glorot(m.trunk, rt, {p.values.data() + pb, static_cast<size_t>(pt)});
  p.values[pb + pt] = 0.0;
  return p;
}

FlatParams model_init(const HyperDeepOnetModel& m, std::uint64_t seed) {
  check(m);
  const long pc = hyper_param_count(m.hyper);
  FlatParams p;
  p.values.resize(pc);
  p.segments.push_back({"hyper", 0, pc});
  Rng rng = Rng::substream(seed, 0);
  fill_hyper_params(m.hyper, rng, {p.values.data(), static_cast<size_t>(pc)});
  return p;
}

FlatParams model_init(const FbHyDonModel& m, std::uint64_t seed) {
  check(m);
  const long po = hyper_param_count(m.op_hyper);
  const long pd = m.dual ? hyper_param_count(m.dom_hyper) : 0;
  FlatParams p;
  p.values.resize(po + pd);
  p.segments.push_back({"op_hyper", 0, po});
  Rng ro = Rng::substream(seed, 0);
  fill_hyper_params(m.op_hyper, ro, {p.values.data(), static_cast<size_t>(po)});
  if (m.dual) {
    p.segments.push_back({"dom_hyper", po, pd});
    Rng rd = Rng::substream(seed, 1);
    fill_hyper_params(m.dom_hyper, rd, {p.values.data() + po, static_cast<size_t>(pd)});
  }
  return p;
}

// ---------------------------------------------------------------------------
// Scalar jet forwards

namespace {

// Window-blended sum over active subdomains; theta_of(j) must stay alive for
// the duration of one call.
template <typename ThetaOf>
Jet2 blended_forward(const Decomposition& dec, const MLPSpec& net, const Eigen::VectorXd& x,
                     ThetaOf&& theta_of) {
  const auto tracked = all_dirs(dec.dim());
  const auto xj = jet_lift(x, tracked);
  const auto active = active_subdomains(dec, x);
  const auto wins = window_jets(dec, active, xj);
  Jet2 out = jet_constant(0.0, dec.dim());
  for (size_t i = 0; i < active.size(); ++i) {
    const Subdomain& sub = dec.subs[active[i]];
    const auto xn = normalize_input_jet(sub, xj);
    const Eigen::VectorXd theta = theta_of(active[i]);
    const auto u = mlp_apply_jet(net, as_span(theta), xn);
    out = out + jet_mul(wins[i], u[0]);
  }
  return out;
}

}  // namespace

Jet2 forward_jet(const FbPinnModel& m, const FlatParams& p, const Eigen::VectorXd& x) {
  const long pc = param_count(m.subnet);
  return blended_forward(m.dec, m.subnet, x,
                         [&](int j) { return Eigen::VectorXd(p.values.segment(j * pc, pc)); });
}

Jet2 forward_jet(const FbHyPinnModel& m, const FlatParams& p, const Eigen::VectorXd& x) {
  const auto hp = p.span_of(p.segment("hyper"));
  return blended_forward(m.dec, m.target, x, [&](int j) {
    return generate_params(m.hyper, hp, subdomain_task(m.dec.subs[j]));
  });
}

Jet2 forward_jet(const DeepOnetModel& m, const FlatParams& p, const Eigen::VectorXd& a,
                 const Eigen::VectorXd& y) {
  const Eigen::VectorXd b = mlp_apply(m.branch, p.span_of(p.segment("branch")), a);
  const auto yj = jet_lift(y, all_dirs(static_cast<int>(y.size())));
  const auto tr = mlp_apply_jet(m.trunk, p.span_of(p.segment("trunk")), yj);
  Jet2 out = jet_constant(p.values[p.segment("bias").offset], static_cast<int>(y.size()));
  for (int q = 0; q < m.trunk.output_dim; ++q) out = out + b[q] * tr[q];
  return out;
}

Jet2 forward_jet(const HyperDeepOnetModel& m, const FlatParams& p, const Eigen::VectorXd& a,
                 const Eigen::VectorXd& y) {
  const Eigen::VectorXd theta = generate_params(m.hyper, p.span_of(p.segment("hyper")), a);
  const auto yj = jet_lift(y, all_dirs(static_cast<int>(y.size())));
  return mlp_apply_jet(m.target, as_span(theta), yj)[0];
}

Jet2 forward_jet(const FbHyDonModel& m, const FlatParams& p, const Eigen::VectorXd& a,
                 const Eigen::VectorXd& y) {
  const auto op = p.span_of(p.segment("op_hyper"));
  if (m.dual) {
    const auto dom = p.span_of(p.segment("dom_hyper"));
    return blended_forward(m.dec, m.target, y, [&](int j) {
      return dual_generate(m.op_hyper, m.dom_hyper, op, dom, a,
                           subdomain_task(m.dec.subs[j]));
    });
  }
  return blended_forward(m.dec, m.target, y, [&](int j) {
    return generate_params(m.op_hyper, op, op_task(a, m.dec.subs[j]));
  });
}

// ---------------------------------------------------------------------------
// Batched prediction

namespace {

struct Group {
  int j = 0;
  std::vector<int> cols;
  Eigen::MatrixXd xnorm;
  Eigen::RowVectorXd win;
};

// Group evaluation points by subdomain with normalized windows (values only).
std::vector<Group> group_points(const Decomposition& dec, const Eigen::MatrixXd& pts) {
  require(pts.rows() == dec.dim(), "group_points: dimension mismatch");
  const int n = static_cast<int>(pts.cols());
  std::vector<std::vector<int>> cols(dec.J());
  std::vector<std::vector<double>> wins(dec.J());
  for (int c = 0; c < n; ++c) {
    const Eigen::VectorXd x = pts.col(c);
    const auto active = active_subdomains(dec, x);
    if (active.empty()) throw std::domain_error("group_points: point not covered");
    double total = 0.0;
    std::vector<double> raw(active.size());
    for (size_t i = 0; i < active.size(); ++i) {
      raw[i] = window_raw(dec.subs[active[i]], x);
      total += raw[i];
    }
    for (size_t i = 0; i < active.size(); ++i) {
      cols[active[i]].push_back(c);
      wins[active[i]].push_back(raw[i] / total);
    }
  }
  std::vector<Group> groups;
  for (int j = 0; j < dec.J(); ++j) {
    if (cols[j].empty()) continue;
    Group g;
    g.j = j;
    g.cols = std::move(cols[j]);
    const int nj = static_cast<int>(g.cols.size());
    g.xnorm.resize(dec.dim(), nj);
    for (int k = 0; k < nj; ++k)
      g.xnorm.col(k) = normalize_input(dec.subs[j], pts.col(g.cols[k]));
    g.win = Eigen::Map<const Eigen::RowVectorXd>(wins[j].data(), nj);
    groups.push_back(std::move(g));
  }
  return groups;
}

template <typename ThetaOf>
Eigen::RowVectorXd blended_predict(const Decomposition& dec, const MLPSpec& net,
                                   const Eigen::MatrixXd& pts, ThetaOf&& theta_of) {
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(pts.cols());
  for (const Group& g : group_points(dec, pts)) {
    const Eigen::VectorXd theta = theta_of(g.j);
    const Eigen::MatrixXd u = mlp_eval(net, as_span(theta), g.xnorm);
    for (size_t k = 0; k < g.cols.size(); ++k)
      out[g.cols[k]] += g.win[static_cast<int>(k)] * u(0, static_cast<int>(k));
  }
  return out;
}

}  // namespace

Eigen::RowVectorXd predict(const FbPinnModel& m, const FlatParams& p, const Eigen::MatrixXd& pts) {
  const long pc = param_count(m.subnet);
  return blended_predict(m.dec, m.subnet, pts,
                         [&](int j) { return Eigen::VectorXd(p.values.segment(j * pc, pc)); });
}

Eigen::RowVectorXd predict(const FbHyPinnModel& m, const FlatParams& p,
                           const Eigen::MatrixXd& pts) {
  const auto hp = p.span_of(p.segment("hyper"));
  return blended_predict(m.dec, m.target, pts, [&](int j) {
    return generate_params(m.hyper, hp, subdomain_task(m.dec.subs[j]));
  });
}

Eigen::RowVectorXd predict(const DeepOnetModel& m, const FlatParams& p, const Eigen::VectorXd& a,
                           const Eigen::MatrixXd& pts) {
  const Eigen::VectorXd b = mlp_apply(m.branch, p.span_of(p.segment("branch")), a);
  const Eigen::MatrixXd tr = mlp_eval(m.trunk, p.span_of(p.segment("trunk")), pts);
  return (b.transpose() * tr).array() + p.values[p.segment("bias").offset];
}

Eigen::RowVectorXd predict(const HyperDeepOnetModel& m, const FlatParams& p,
                           const Eigen::VectorXd& a, const Eigen::MatrixXd& pts) {
  const Eigen::VectorXd theta = generate_params(m.hyper, p.span_of(p.segment("hyper")), a);
  return mlp_eval(m.target, as_span(theta), pts).row(0);
}

Eigen::RowVectorXd predict(const FbHyDonModel& m, const FlatParams& p, const Eigen::VectorXd& a,
                           const Eigen::MatrixXd& pts) {
  const auto op = p.span_of(p.segment("op_hyper"));
  if (m.dual) {
    const auto dom = p.span_of(p.segment("dom_hyper"));
    return blended_predict(m.dec, m.target, pts, [&](int j) {
      return dual_generate(m.op_hyper, m.dom_hyper, op, dom, a, subdomain_task(m.dec.subs[j]));
    });
  }
  return blended_predict(m.dec, m.target, pts, [&](int j) {
    return generate_params(m.op_hyper, op, op_task(a, m.dec.subs[j]));
  });
}

// ---------------------------------------------------------------------------
// Prepared batches

PreparedBatch prepare_batch(const Decomposition& dec, const Eigen::MatrixXd& pts,
                            const ChannelSpec& ch) {
  require(pts.rows() == dec.dim(), "prepare_batch: dimension mismatch");
  require(ch.dims == static_cast<int>(pts.rows()),
          "prepare_batch: tracked directions must match the coordinate dimension");
  const int n = static_cast<int>(pts.cols());
  const int d = dec.dim();
  const auto tracked = all_dirs(ch.dims);

  struct Builder {
    std::vector<int> cols;
    std::vector<double> xnorm;                   // d values per point
    std::vector<std::vector<double>> xnorm_d1;   // per direction, d per point
    std::vector<double> win_v;
    std::vector<std::vector<double>> win_d1;
    std::vector<std::vector<double>> win_d2;
  };
  std::vector<Builder> builders(dec.J());
  for (auto& b : builders) {
    b.xnorm_d1.resize(ch.dims);
    b.win_d1.resize(ch.dims);
    b.win_d2.resize(ch.pairs.size());
  }

  for (int c = 0; c < n; ++c) {
    const Eigen::VectorXd x = pts.col(c);
    const auto xj = jet_lift(x, tracked);
    const auto active = active_subdomains(dec, x);
    const auto wins = window_jets(dec, active, xj);  // throws if uncovered
    for (size_t i = 0; i < active.size(); ++i) {
      Builder& b = builders[active[i]];
      b.cols.push_back(c);
      const auto xn = normalize_input_jet(dec.subs[active[i]], xj);
      for (int r = 0; r < d; ++r) b.xnorm.push_back(xn[r].v);
      for (int k = 0; k < ch.dims; ++k)
        for (int r = 0; r < d; ++r) b.xnorm_d1[k].push_back(xn[r].d1[k]);
      const Jet2& w = wins[i];
      b.win_v.push_back(w.v);
      for (int k = 0; k < ch.dims; ++k) b.win_d1[k].push_back(w.d1[k]);
      for (size_t pr = 0; pr < ch.pairs.size(); ++pr)
        b.win_d2[pr].push_back(w.d2_at(ch.pairs[pr].first, ch.pairs[pr].second));
    }
  }

  PreparedBatch pb;
  pb.n = n;
  pb.windowed = true;
  pb.ch = ch;
  pb.pts = pts;
  for (int j = 0; j < dec.J(); ++j) {
    Builder& b = builders[j];
    if (b.cols.empty()) continue;
    const int nj = static_cast<int>(b.cols.size());
    PreparedBatch::PerSub ps;
    ps.j = j;
    ps.cols = std::move(b.cols);
    ps.xnorm = Eigen::Map<const Eigen::MatrixXd>(b.xnorm.data(), d, nj);
    for (int k = 0; k < ch.dims; ++k)
      ps.xnorm_d1.push_back(Eigen::Map<const Eigen::MatrixXd>(b.xnorm_d1[k].data(), d, nj));
    ps.win_v = Eigen::Map<const Eigen::RowVectorXd>(b.win_v.data(), nj);
    for (int k = 0; k < ch.dims; ++k)
      ps.win_d1.push_back(Eigen::Map<const Eigen::RowVectorXd>(b.win_d1[k].data(), nj));
    for (size_t pr = 0; pr < ch.pairs.size(); ++pr)
      ps.win_d2.push_back(Eigen::Map<const Eigen::RowVectorXd>(b.win_d2[pr].data(), nj));
    pb.subs.push_back(std::move(ps));
  }
  return pb;
}

PreparedBatch prepare_plain(const Eigen::MatrixXd& pts, const ChannelSpec& ch) {
  require(ch.dims == static_cast<int>(pts.rows()),
          "prepare_plain: tracked directions must match the coordinate dimension");
  const int n = static_cast<int>(pts.cols());
  PreparedBatch pb;
  pb.n = n;
  pb.windowed = false;
  pb.ch = ch;
  pb.pts = pts;
  PreparedBatch::PerSub ps;
  ps.j = 0;
  ps.cols.resize(n);
  std::iota(ps.cols.begin(), ps.cols.end(), 0);
  ps.xnorm = pts;
  for (int k = 0; k < ch.dims; ++k) {
    Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(pts.rows(), n);
    dk.row(k).setOnes();
    ps.xnorm_d1.push_back(std::move(dk));
  }
  pb.subs.push_back(std::move(ps));
  return pb;
}

// ---------------------------------------------------------------------------
// Tape staging

StagedField stage(Tape& tape, const FbPinnModel& m, NodeRef params) {
  check(m);
  const long pc = param_count(m.subnet);
  StagedField f;
  for (int j = 0; j < m.dec.J(); ++j)
    f.nets.push_back(tape_mlp(tape, m.subnet, params, j * pc));
  return f;
}

StagedField stage(Tape& tape, const FbHyPinnModel& m, NodeRef params) {
  check(m);
  const TapeHypernet hyper = tape_hypernet(tape, m.hyper, params, 0);
  StagedField f;
  for (int j = 0; j < m.dec.J(); ++j) {
    const NodeRef task = tape.leaf(subdomain_task(m.dec.subs[j]));
    const NodeRef theta = tape_generate(tape, hyper, task);
    f.nets.push_back(tape_mlp(tape, m.target, theta, 0));
  }
  return f;
}

TapeHypernet stage_hyper(Tape& tape, const HyperDeepOnetModel& m, NodeRef params) {
  check(m);
  return tape_hypernet(tape, m.hyper, params, 0);
}

StagedField stage_fn(Tape& tape, const HyperDeepOnetModel& m, const TapeHypernet& hyper,
                     const Eigen::VectorXd& a) {
  const NodeRef theta = tape_generate(tape, hyper, tape.leaf(a));
  return StagedField{{tape_mlp(tape, m.target, theta, 0)}};
}

StagedDualHyper stage_hyper(Tape& tape, const FbHyDonModel& m, NodeRef params) {
  check(m);
  StagedDualHyper h;
  h.dual = m.dual;
  h.op = tape_hypernet(tape, m.op_hyper, params, 0);
  if (m.dual) h.dom = tape_hypernet(tape, m.dom_hyper, params, hyper_param_count(m.op_hyper));
  return h;
}

StagedField stage_fn(Tape& tape, const FbHyDonModel& m, const StagedDualHyper& hyper,
                     const Eigen::VectorXd& a) {
  StagedField f;
  if (m.dual) {
    const NodeRef a_col = tape.leaf(a);
    for (int j = 0; j < m.dec.J(); ++j) {
      const NodeRef sub_col = tape.leaf(subdomain_task(m.dec.subs[j]));
      const NodeRef theta = tape_dual_generate(tape, hyper.op, hyper.dom, a_col, sub_col);
      f.nets.push_back(tape_mlp(tape, m.target, theta, 0));
    }
  } else {
    for (int j = 0; j < m.dec.J(); ++j) {
      const NodeRef task = tape.leaf(op_task(a, m.dec.subs[j]));
      const NodeRef theta = tape_generate(tape, hyper.op, task);
      f.nets.push_back(tape_mlp(tape, m.target, theta, 0));
    }
  }
  return f;
}

namespace {

JetBatch input_jets(Tape& tape, const PreparedBatch::PerSub& ps, const ChannelSpec& ch) {
  JetBatch x;
  x.pairs = ch.pairs;
  x.v = tape.leaf(ps.xnorm);
  for (int k = 0; k < ch.dims; ++k) x.d1.push_back(tape.leaf(ps.xnorm_d1[k]));
  x.d2.assign(ch.pairs.size(), NodeRef{});  // affine in x: no curvature
  return x;
}

// Product rule against the constant window channels.
JetBatch window_product(Tape& tape, const PreparedBatch::PerSub& ps, const ChannelSpec& ch,
                        const JetBatch& u) {
  const NodeRef wv = tape.leaf(ps.win_v);
  std::vector<NodeRef> wd1, wd2;
  for (int k = 0; k < ch.dims; ++k) wd1.push_back(tape.leaf(ps.win_d1[k]));
  for (size_t pr = 0; pr < ch.pairs.size(); ++pr) wd2.push_back(tape.leaf(ps.win_d2[pr]));

  JetBatch out;
  out.pairs = ch.pairs;
  out.v = tape.mul(wv, u.v);
  for (int k = 0; k < ch.dims; ++k)
    out.d1.push_back(add_maybe(tape, tape.mul(wd1[k], u.v), mul_maybe(tape, wv, u.d1[k])));
  for (size_t pr = 0; pr < ch.pairs.size(); ++pr) {
    const auto [i, j] = ch.pairs[pr];
    NodeRef acc = tape.mul(wd2[pr], u.v);
    acc = add_maybe(tape, acc, mul_maybe(tape, wd1[i], u.d1[j]));
    acc = add_maybe(tape, acc, mul_maybe(tape, wd1[j], u.d1[i]));
    acc = add_maybe(tape, acc, mul_maybe(tape, wv, u.d2[pr]));
    out.d2.push_back(acc);
  }
  return out;
}

NodeRef scatter_channel(Tape& tape, NodeRef ch, const std::vector<int>& cols, int n) {
  if (!ch.valid()) return ch;
  if (static_cast<int>(cols.size()) == n) return ch;  // covers every column in order
  return tape.scatter_cols(ch, cols, n);
}

}  // namespace

JetBatch field_rows(Tape& tape, const StagedField& staged, const PreparedBatch& batch) {
  JetBatch out;
  out.pairs = batch.ch.pairs;
  out.d1.assign(batch.ch.dims, NodeRef{});
  out.d2.assign(batch.ch.pairs.size(), NodeRef{});

  for (const auto& ps : batch.subs) {
    const TapeMlp& net =
        staged.nets.size() == 1 ? staged.nets[0] : staged.nets[static_cast<size_t>(ps.j)];
    const JetBatch x = input_jets(tape, ps, batch.ch);
    JetBatch u = tape_mlp_jet(tape, net, x);
    if (batch.windowed) u = window_product(tape, ps, batch.ch, u);

    out.v = add_maybe(tape, out.v, scatter_channel(tape, u.v, ps.cols, batch.n));
    for (int k = 0; k < batch.ch.dims; ++k)
      out.d1[k] = add_maybe(tape, out.d1[k], scatter_channel(tape, u.d1[k], ps.cols, batch.n));
    for (size_t pr = 0; pr < batch.ch.pairs.size(); ++pr)
      out.d2[pr] = add_maybe(tape, out.d2[pr], scatter_channel(tape, u.d2[pr], ps.cols, batch.n));
  }
  return out;
}

StagedDon stage(Tape& tape, const DeepOnetModel& m, NodeRef params) {
  check(m);
  StagedDon s;
  s.branch = tape_mlp(tape, m.branch, params, 0);
  s.trunk = tape_mlp(tape, m.trunk, params, param_count(m.branch));
  s.bias = tape.slice_rows(params, static_cast<int>(param_count(m.branch) + param_count(m.trunk)),
                           1, 1);
  return s;
}

JetBatch trunk_rows(Tape& tape, const StagedDon& staged, const PreparedBatch& batch) {
  require(!batch.windowed && batch.subs.size() == 1,
          "trunk_rows: trunk inputs must be a plain batch");
  const JetBatch x = input_jets(tape, batch.subs[0], batch.ch);
  return tape_mlp_jet(tape, staged.trunk, x);
}

JetBatch don_rows(Tape& tape, const StagedDon& staged, const JetBatch& trunk,
                  const Eigen::VectorXd& a) {
  const NodeRef b = tape_mlp_eval(tape, staged.branch, tape.leaf(a));
  JetBatch out;
  out.pairs = trunk.pairs;
  out.v = tape.add_col(tape.matmul_ta(b, trunk.v), staged.bias);
  for (NodeRef d : trunk.d1)
    out.d1.push_back(d.valid() ? tape.matmul_ta(b, d) : NodeRef{});
  for (NodeRef d : trunk.d2)
    out.d2.push_back(d.valid() ? tape.matmul_ta(b, d) : NodeRef{});
  return out;
}

JetBatch don_rows_batched(Tape& tape, const StagedDon& staged, const JetBatch& trunk,
                          const Eigen::MatrixXd& A) {
  const int nb = static_cast<int>(A.cols());
  const NodeRef b = tape_mlp_eval(tape, staged.branch, tape.leaf(A));
  const std::vector<NodeRef> bias_rows(static_cast<size_t>(nb), staged.bias);
  const NodeRef bias_col = nb == 1 ? staged.bias : tape.vstack(bias_rows);
  JetBatch out;
  out.pairs = trunk.pairs;
  out.v = tape.add_col(tape.matmul_ta(b, trunk.v), bias_col);
  for (NodeRef d : trunk.d1)
    out.d1.push_back(d.valid() ? tape.matmul_ta(b, d) : NodeRef{});
  for (NodeRef d : trunk.d2)
    out.d2.push_back(d.valid() ? tape.matmul_ta(b, d) : NodeRef{});
  return out;
}

}  // namespace fbh
