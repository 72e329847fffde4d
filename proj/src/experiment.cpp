#include "fbh/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <utility>

#include "fbh/cole_hopf.hpp"
#include "fbh/dataset.hpp"
#include "fbh/metrics.hpp"
#include "fbh/problems.hpp"
#include "fbh/rng.hpp"
#include "fbh/spectral.hpp"
#include "json.hpp"

namespace fbh {
namespace {

namespace fs = std::filesystem;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void cfg_fail(const std::string& msg) { throw ConfigError(msg); }
[[noreturn]] void io_fail(const std::string& msg) { throw IoError(msg); }

// ---------------------------------------------------------------------------
// Problem classification and geometry

bool operator_problem(const std::string& id) {
  return id == "oscillator" || id == "burgers_operator" || id == "allen_cahn";
}

// Domain box. 1D problems use their single axis (x for sinusoidal, t for the
// oscillator); space-time problems order coordinates (x, t).
void domain_bounds(const ProblemConfig& p, Eigen::VectorXd& lo, Eigen::VectorXd& hi) {
  if (p.id == "sinusoidal") {
    lo = Eigen::VectorXd::Constant(1, p.x_lo);
    hi = Eigen::VectorXd::Constant(1, p.x_hi);
  } else if (p.id == "oscillator") {
    lo = Eigen::VectorXd::Constant(1, 0.0);
    hi = Eigen::VectorXd::Constant(1, p.t_hi);
  } else {
    lo.resize(2);
    hi.resize(2);
    lo << p.x_lo, 0.0;
    hi << p.x_hi, p.t_hi;
  }
}

// The oscillator's input function is its IC pair, read out directly.
int sensor_count(const ExperimentConfig& cfg) {
  return cfg.problem.id == "oscillator" ? 2 : cfg.model.sensors;
}

double problem_code(const std::string& id) {
  if (id == "oscillator") return 1.0;
  if (id == "burgers_operator") return 2.0;
  if (id == "allen_cahn") return 3.0;
  throw std::logic_error("problem_code: not an operator problem");
}

GrfSampler grf_for(const ProblemConfig& p) {
  GrfSampler s;
  s.lo = p.x_lo;
  s.length = p.x_hi - p.x_lo;
  return s;
}

// Periodic sensor layout: n equispaced points with the right endpoint open
// (it aliases the left one).
Eigen::VectorXd sensor_grid(const ProblemConfig& p, int n) {
  Eigen::VectorXd xs(n);
  const double len = p.x_hi - p.x_lo;
  for (int i = 0; i < n; ++i) xs[i] = p.x_lo + len * i / n;
  return xs;
}

Decomposition build_decomposition(const ExperimentConfig& cfg, const Eigen::VectorXd& lo,
                                  const Eigen::VectorXd& hi) {
  const std::vector<int>& counts = cfg.model.subdomains;
  if (counts.empty()) cfg_fail("model.subdomains is required for model '" + cfg.model.id + "'");
  if (static_cast<int>(counts.size()) != lo.size())
    cfg_fail("model.subdomains must list one count per domain dimension (" +
             std::to_string(lo.size()) + " for problem '" + cfg.problem.id + "')");
  Eigen::VectorXd widths(lo.size());
  for (Eigen::Index d = 0; d < lo.size(); ++d) {
    if (counts[d] < 1) cfg_fail("model.subdomains entries must be positive");
    widths[d] = cfg.model.overlap * (hi[d] - lo[d]) / counts[d];
  }
  return uniform_decomposition(lo, hi, counts, widths);
}

// ---------------------------------------------------------------------------
// Reference solving

// Largest step <= 2e-4 that lands every snapshot on a whole number of steps.
SpectralConfig reference_stepper(double t_hi, int nt) {
  if (nt < 2) cfg_fail("eval.nt must be at least 2 for reference solutions");
  const double snap_dt = t_hi / (nt - 1);
  const long per_snap = std::max(1L, static_cast<long>(std::ceil(snap_dt / 2e-4 - 1e-9)));
  SpectralConfig c;
  c.dt = snap_dt / static_cast<double>(per_snap);
  c.n_snapshots = nt;
  c.t_end = t_hi;
  return c;
}

// Solve at twice the evaluation resolution, keep every other grid line. The
// input function is band-limited, so evaluating it on the fine grid is exact.
ReferenceSolution solve_reference(const ProblemConfig& p, const GrfSample& fn, int nx, int nt) {
  if (nx < 4) cfg_fail("eval.nx must be at least 4 for reference solutions");
  const int fine = 2 * nx;
  const double len = p.x_hi - p.x_lo;
  Eigen::VectorXd a(fine);
  for (int i = 0; i < fine; ++i) a[i] = fn.eval(p.x_lo + len * i / fine);
  const SpectralConfig cfg = reference_stepper(p.t_hi, nt);
  const ReferenceSolution full = p.id == "burgers_operator"
                                     ? burgers_reference(a, p.x_lo, len, p.nu, cfg)
                                     : allen_cahn_reference(a, p.x_lo, len, cfg);
  ReferenceSolution out;
  out.t = full.t;
  out.x.resize(nx);
  out.u.resize(nx, full.u.cols());
  for (int i = 0; i < nx; ++i) {
    out.x[i] = full.x[2 * i];
    out.u.row(i) = full.u.row(2 * i);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Model assembly

AnyModel build_model(const ExperimentConfig& cfg) {
  const std::string& mid = cfg.model.id;
  const std::string& pid = cfg.problem.id;
  const bool op_model =
      mid == "deeponet" || mid == "hyperdeeponet" || mid == "fb_hydon" || mid == "fb_hydon2";
  if (op_model != operator_problem(pid))
    cfg_fail("model '" + mid + "' does not apply to problem '" + pid + "'");

  Eigen::VectorXd lo, hi;
  domain_bounds(cfg.problem, lo, hi);
  const int dim = static_cast<int>(lo.size());
  const int ns = sensor_count(cfg);
  if (op_model && ns < 1) cfg_fail("model.sensors must be positive");
  if (cfg.model.n_chunks < 1) cfg_fail("model.n_chunks must be positive");

  const MLPSpec target = mlp_spec(dim, cfg.model.target_hidden, 1, Activation::kTanh);
  try {
    if (mid != "deeponet") target.validate();
    if (mid == "fbpinn") return FbPinnModel{build_decomposition(cfg, lo, hi), target};
    if (mid == "fb_hypinn") {
      Decomposition dec = build_decomposition(cfg, lo, hi);
      ChunkedHypernetSpec hyper =
          chunked_hypernet(2 * dim, cfg.model.hyper_hidden, param_count(target), 1);
      return FbHyPinnModel{std::move(dec), std::move(hyper), target};
    }
    if (mid == "deeponet") {
      if (cfg.model.latent < 1) cfg_fail("model.latent must be positive");
      DeepOnetModel m{mlp_spec(ns, cfg.model.branch_hidden, cfg.model.latent, Activation::kTanh),
                      mlp_spec(dim, cfg.model.trunk_hidden, cfg.model.latent, Activation::kTanh)};
      m.branch.validate();
      m.trunk.validate();
      return m;
    }
    if (mid == "hyperdeeponet") {
      ChunkedHypernetSpec hyper =
          chunked_hypernet(ns, cfg.model.hyper_hidden, param_count(target), cfg.model.n_chunks);
      return HyperDeepOnetModel{std::move(hyper), target};
    }
    // fb_hydon / fb_hydon2
    Decomposition dec = build_decomposition(cfg, lo, hi);
    const long tp = param_count(target);
    if (mid == "fb_hydon") {
      ChunkedHypernetSpec hyper =
          chunked_hypernet(ns + 2 * dim, cfg.model.hyper_hidden, tp, cfg.model.n_chunks);
      return FbHyDonModel{std::move(dec), false, std::move(hyper), ChunkedHypernetSpec{}, target};
    }
    const std::vector<int>& dom_hidden =
        cfg.model.hyper2_hidden.empty() ? cfg.model.hyper_hidden : cfg.model.hyper2_hidden;
    ChunkedHypernetSpec op = chunked_hypernet(ns, cfg.model.hyper_hidden, tp, cfg.model.n_chunks);
    ChunkedHypernetSpec dom = chunked_hypernet(2 * dim, dom_hidden, tp, cfg.model.n_chunks);
    return FbHyDonModel{std::move(dec), true, std::move(op), std::move(dom), target};
  } catch (const std::invalid_argument& e) {
    cfg_fail(e.what());
  } catch (const std::domain_error& e) {
    cfg_fail(e.what());
  }
}

long any_param_count(const AnyModel& m) {
  return std::visit([](const auto& v) { return model_param_count(v); }, m);
}

FlatParams any_init(const AnyModel& m, std::uint64_t seed) {
  return std::visit([seed](const auto& v) { return model_init(v, seed); }, m);
}

// ---------------------------------------------------------------------------
// Operator data

OperatorData make_operator_data(const ExperimentConfig& cfg) {
  const ProblemConfig& p = cfg.problem;
  if (!operator_problem(p.id)) throw std::logic_error("make_operator_data: not an operator problem");
  const long n_train = cfg.data.n_train;
  const long n_test = cfg.data.n_test;
  if (n_train < 1) cfg_fail("data.n_train must be positive");
  if (n_test < 0) cfg_fail("data.n_test must be non-negative");

  OperatorData d;
  d.problem = p.id;
  if (p.id == "oscillator") {
    auto draw = [&](std::uint64_t stream) {
      Rng rng = Rng::substream(cfg.data.seed, stream);
      Eigen::Vector2d ic;
      ic[0] = rng.uniform(0.0, 1.0);
      ic[1] = rng.uniform(-50.0, 50.0);
      return ic;
    };
    d.train_ic.resize(2, n_train);
    for (long i = 0; i < n_train; ++i) d.train_ic.col(i) = draw(2 * static_cast<std::uint64_t>(i));
    d.test_ic.resize(2, n_test);
    for (long j = 0; j < n_test; ++j)
      d.test_ic.col(j) = draw(2 * static_cast<std::uint64_t>(j) + 1);
    d.train_sensors = d.train_ic;
    d.test_sensors = d.test_ic;
    return d;
  }

  const GrfSampler sampler = grf_for(p);
  const int ns = sensor_count(cfg);
  const Eigen::VectorXd xs = sensor_grid(p, ns);
  auto draw = [&](std::uint64_t stream) {
    Rng rng = Rng::substream(cfg.data.seed, stream);
    return sample_grf(sampler, rng);
  };
  d.train_sensors.resize(ns, n_train);
  d.train_fns.reserve(static_cast<size_t>(n_train));
  for (long i = 0; i < n_train; ++i) {
    d.train_fns.push_back(draw(2 * static_cast<std::uint64_t>(i)));
    d.train_sensors.col(i) = d.train_fns.back().eval(xs);
  }
  d.test_sensors.resize(ns, n_test);
  d.test_fns.reserve(static_cast<size_t>(n_test));
  d.test_refs.reserve(static_cast<size_t>(n_test));
  for (long j = 0; j < n_test; ++j) {
    d.test_fns.push_back(draw(2 * static_cast<std::uint64_t>(j) + 1));
    d.test_sensors.col(j) = d.test_fns.back().eval(xs);
    try {
      ReferenceSolution ref = solve_reference(p, d.test_fns.back(), cfg.eval.nx, cfg.eval.nt);
      if (j == 0) {
        d.ref_x = ref.x;
        d.ref_t = ref.t;
      }
      d.test_refs.push_back(std::move(ref.u));
    } catch (const InstabilityError& e) {
      throw InstabilityError("test function " + std::to_string(j) + ": " + e.what());
    }
  }
  return d;
}

OperatorData load_operator_data(const ExperimentConfig& cfg) {
  if (cfg.data.path.empty()) return make_operator_data(cfg);
  const std::string& path = cfg.data.path;
  const ArrayBundle b = load_bundle(path);
  auto need = [&](const std::string& name) {
    if (!b.has(name)) io_fail("dataset " + path + " is missing array '" + name + "'");
  };
  need("problem");
  if (b.scalar("problem") != problem_code(cfg.problem.id))
    io_fail("dataset " + path + " was generated for a different problem than '" +
            cfg.problem.id + "'");
  need("n_train");
  need("n_test");
  const long held_train = static_cast<long>(b.scalar("n_train"));
  const long held_test = static_cast<long>(b.scalar("n_test"));
  const long n_train = cfg.data.n_train;
  const long n_test = cfg.data.n_test;
  if (n_train > held_train || n_test > held_test)
    io_fail("dataset " + path + " holds " + std::to_string(held_train) + "/" +
            std::to_string(held_test) + " train/test functions; config asks for " +
            std::to_string(n_train) + "/" + std::to_string(n_test));
  if (n_train < 1) cfg_fail("data.n_train must be positive");

  OperatorData d;
  d.problem = cfg.problem.id;
  if (cfg.problem.id == "oscillator") {
    need("train_ic");
    d.train_ic = b.matrix("train_ic").leftCols(n_train);
    if (n_test > 0) {
      need("test_ic");
      d.test_ic = b.matrix("test_ic").leftCols(n_test);
    } else {
      d.test_ic.resize(2, 0);
    }
    d.train_sensors = d.train_ic;
    d.test_sensors = d.test_ic;
    return d;
  }

  if (cfg.problem.id == "burgers_operator") {
    need("nu");
    if (b.scalar("nu") != cfg.problem.nu)
      io_fail("dataset " + path + " was generated at a different viscosity");
  }
  need("grf_n");
  need("grf_lo");
  need("grf_length");
  need("sensors_x");
  const int grf_n = static_cast<int>(b.scalar("grf_n"));
  const double grf_lo = b.scalar("grf_lo");
  const double grf_length = b.scalar("grf_length");
  if (grf_lo != cfg.problem.x_lo || grf_lo + grf_length != cfg.problem.x_hi)
    io_fail("dataset " + path + " covers a different spatial domain");
  if (static_cast<int>(b.vec("sensors_x").size()) != sensor_count(cfg))
    io_fail("dataset " + path + " holds " + std::to_string(b.vec("sensors_x").size()) +
            " sensor readouts per function; model expects " +
            std::to_string(sensor_count(cfg)));

  auto unpack = [&](const std::string& prefix, long count) {
    std::vector<GrfSample> fns;
    if (count == 0) return fns;
    const Eigen::MatrixXd re = b.matrix(prefix + "_coef_re");
    const Eigen::MatrixXd im = b.matrix(prefix + "_coef_im");
    fns.reserve(static_cast<size_t>(count));
    for (long i = 0; i < count; ++i) {
      GrfSample s;
      s.lo = grf_lo;
      s.length = grf_length;
      s.coef.resize(grf_n / 2 + 1);
      for (int k = 0; k <= grf_n / 2; ++k) s.coef[k] = {re(k, i), im(k, i)};
      s.grid.resize(grf_n);
      for (int j = 0; j < grf_n; ++j) s.grid[j] = s.eval(grf_lo + grf_length * j / grf_n);
      fns.push_back(std::move(s));
    }
    return fns;
  };
  need("train_coef_re");
  need("train_coef_im");
  need("train_sensors");
  d.train_fns = unpack("train", n_train);
  d.train_sensors = b.matrix("train_sensors").leftCols(n_train);
  if (n_test > 0) {
    need("test_coef_re");
    need("test_coef_im");
    need("test_sensors");
    d.test_fns = unpack("test", n_test);
    d.test_sensors = b.matrix("test_sensors").leftCols(n_test);
    need("ref_x");
    need("ref_t");
    d.ref_x = b.vec("ref_x");
    d.ref_t = b.vec("ref_t");
    d.test_refs.reserve(static_cast<size_t>(n_test));
    for (long j = 0; j < n_test; ++j) {
      const std::string name = "ref_" + std::to_string(j);
      need(name);
      d.test_refs.push_back(b.matrix(name));
    }
  } else {
    d.test_sensors.resize(sensor_count(cfg), 0);
  }
  return d;
}

void generate_dataset(const std::string& problem, long n_train, long n_test, std::uint64_t seed,
                      const std::string& out_path) {
  if (!operator_problem(problem))
    cfg_fail("dataset generation applies to operator problems "
             "(oscillator, burgers_operator, allen_cahn); got '" + problem + "'");
  ExperimentConfig cfg =
      parse_config(R"({"problem":{"id":")" + problem + R"("},"model":{"id":"deeponet"}})");
  cfg.data.n_train = n_train;
  cfg.data.n_test = n_test;
  cfg.data.seed = seed;
  const OperatorData d = make_operator_data(cfg);

  ArrayBundle b;
  b.put_scalar("problem", problem_code(problem));
  b.put_scalar("seed_lo", static_cast<double>(seed & 0xffffffffULL));
  b.put_scalar("seed_hi", static_cast<double>(seed >> 32));
  b.put_scalar("n_train", static_cast<double>(n_train));
  b.put_scalar("n_test", static_cast<double>(n_test));
  if (problem == "oscillator") {
    b.put_matrix("train_ic", d.train_ic);
    if (n_test > 0) b.put_matrix("test_ic", d.test_ic);
    save_bundle(out_path, b);
    return;
  }

  const GrfSampler sampler = grf_for(cfg.problem);
  b.put_scalar("grf_n", static_cast<double>(sampler.n));
  b.put_scalar("grf_lo", sampler.lo);
  b.put_scalar("grf_length", sampler.length);
  if (problem == "burgers_operator") b.put_scalar("nu", cfg.problem.nu);
  b.put_vector("sensors_x", sensor_grid(cfg.problem, sensor_count(cfg)));
  auto pack = [&](const std::string& prefix, const std::vector<GrfSample>& fns) {
    if (fns.empty()) return;
    const int nk = sampler.n / 2 + 1;
    Eigen::MatrixXd re(nk, static_cast<long>(fns.size())), im(nk, static_cast<long>(fns.size()));
    for (size_t i = 0; i < fns.size(); ++i)
      for (int k = 0; k < nk; ++k) {
        re(k, static_cast<long>(i)) = fns[i].coef[k].real();
        im(k, static_cast<long>(i)) = fns[i].coef[k].imag();
      }
    b.put_matrix(prefix + "_coef_re", re);
    b.put_matrix(prefix + "_coef_im", im);
  };
  pack("train", d.train_fns);
  pack("test", d.test_fns);
  b.put_matrix("train_sensors", d.train_sensors);
  if (n_test > 0) {
    b.put_matrix("test_sensors", d.test_sensors);
    b.put_vector("ref_x", d.ref_x);
    b.put_vector("ref_t", d.ref_t);
    for (long j = 0; j < n_test; ++j)
      b.put_matrix("ref_" + std::to_string(j), d.test_refs[static_cast<size_t>(j)]);
  }
  save_bundle(out_path, b);
}

// ---------------------------------------------------------------------------
// Loss assembly

namespace {

using LossFn = std::function<NodeRef(Tape&, NodeRef, long)>;

// Point sets are drawn once per run from dedicated substreams of the training
// seed; operator interior points come in rotating blocks, and function i is
// permanently tied to block i mod n_blocks so its point set never changes.
constexpr std::uint64_t kStreamColloc = 100;  // +block
constexpr std::uint64_t kStreamPinnIc = 101;
constexpr std::uint64_t kStreamPinnBc = 102;
constexpr std::uint64_t kStreamOpIc = 110;
constexpr std::uint64_t kStreamOpBc = 111;

struct LossPlan {
  int n_blocks = 1;
  std::vector<PreparedBatch> colloc;
  Eigen::RowVectorXd cos_row;   // sinusoidal forcing over the collocation set
  PreparedBatch ic;
  Eigen::MatrixXd ic_targets;   // PINN: 1 x n_ic; operators: n_ic x n_train
  bool has_bc = false;
  PreparedBatch bc_lo, bc_hi;
};

PreparedBatch prep(const Decomposition* dec, const Eigen::MatrixXd& pts, const ChannelSpec& ch) {
  return dec ? prepare_batch(*dec, pts, ch) : prepare_plain(pts, ch);
}

Eigen::MatrixXd column_points(const Eigen::RowVectorXd& xs, double fill, bool fill_second) {
  Eigen::MatrixXd pts(2, xs.size());
  if (fill_second) {
    pts.row(0) = xs;
    pts.row(1).setConstant(fill);
  } else {
    pts.row(0).setConstant(fill);
    pts.row(1) = xs;
  }
  return pts;
}

std::shared_ptr<LossPlan> pinn_plan(const ExperimentConfig& cfg, const Decomposition& dec) {
  const ProblemConfig& p = cfg.problem;
  auto plan = std::make_shared<LossPlan>();
  Eigen::VectorXd lo, hi;
  domain_bounds(p, lo, hi);
  if (cfg.train.collocation < 1) cfg_fail("train.collocation must be positive");
  Rng rng = Rng::substream(cfg.train.seed, kStreamColloc);
  const Eigen::MatrixXd pts = quasirandom_box(lo, hi, static_cast<int>(cfg.train.collocation), rng);

  if (p.id == "sinusoidal") {
    plan->colloc.push_back(prep(&dec, pts, channels_sinusoidal()));
    plan->cos_row.resize(pts.cols());
    for (Eigen::Index i = 0; i < pts.cols(); ++i) plan->cos_row[i] = std::cos(p.omega * pts(0, i));
    plan->ic = prep(&dec, Eigen::MatrixXd::Zero(1, 1), ChannelSpec{1, {}});
    plan->ic_targets = Eigen::MatrixXd::Zero(1, 1);
    return plan;
  }

  // Viscous shock benchmark: residual in the interior, the initial profile on
  // t = 0, and homogeneous Dirichlet walls.
  plan->colloc.push_back(prep(&dec, pts, channels_space_time()));
  if (cfg.train.ic_points < 1 || cfg.train.bc_points < 1)
    cfg_fail("train.ic_points and train.bc_points must be positive");
  const ChannelSpec value_ch{2, {}};
  Rng ic_rng = Rng::substream(cfg.train.seed, kStreamPinnIc);
  const Eigen::MatrixXd ic_x = quasirandom_box(lo.head(1), hi.head(1),
                                          static_cast<int>(cfg.train.ic_points), ic_rng);
  plan->ic = prep(&dec, column_points(ic_x.row(0), 0.0, true), value_ch);
  plan->ic_targets.resize(1, ic_x.cols());
  for (Eigen::Index i = 0; i < ic_x.cols(); ++i)
    plan->ic_targets(0, i) = burgers_initial(ic_x(0, i));

  Rng bc_rng = Rng::substream(cfg.train.seed, kStreamPinnBc);
  const Eigen::MatrixXd bc_t = quasirandom_box(lo.tail(1), hi.tail(1),
                                          static_cast<int>(cfg.train.bc_points), bc_rng);
  plan->has_bc = true;
  plan->bc_lo = prep(&dec, column_points(bc_t.row(0), p.x_lo, false), value_ch);
  plan->bc_hi = prep(&dec, column_points(bc_t.row(0), p.x_hi, false), value_ch);
  return plan;
}

std::shared_ptr<LossPlan> operator_plan(const ExperimentConfig& cfg, const OperatorData& data,
                                        const Decomposition* dec) {
  const ProblemConfig& p = cfg.problem;
  auto plan = std::make_shared<LossPlan>();
  Eigen::VectorXd lo, hi;
  domain_bounds(p, lo, hi);
  if (cfg.train.colloc_per_fn < 1) cfg_fail("train.colloc_per_fn must be positive");
  const long n_train = data.train_sensors.cols();
  plan->n_blocks = p.id == "oscillator" ? 1 : static_cast<int>(std::min<long>(8, n_train));
  const ChannelSpec res_ch =
      p.id == "oscillator" ? channels_oscillator() : channels_space_time();
  for (int b = 0; b < plan->n_blocks; ++b) {
    Rng rng = Rng::substream(cfg.train.seed, kStreamColloc + static_cast<std::uint64_t>(b));
    plan->colloc.push_back(
        prep(dec, quasirandom_box(lo, hi, static_cast<int>(cfg.train.colloc_per_fn), rng), res_ch));
  }

  if (p.id == "oscillator") {
    // Initial state at t = 0: value and velocity.
    plan->ic = prep(dec, Eigen::MatrixXd::Zero(1, 1), channels_oscillator());
    return plan;
  }

  if (cfg.train.ic_points < 1 || cfg.train.bc_points < 1)
    cfg_fail("train.ic_points and train.bc_points must be positive");
  const ChannelSpec value_ch{2, {}};
  Rng ic_rng = Rng::substream(cfg.train.seed, kStreamOpIc);
  const Eigen::MatrixXd ic_x = quasirandom_box(lo.head(1), hi.head(1),
                                          static_cast<int>(cfg.train.ic_points), ic_rng);
  plan->ic = prep(dec, column_points(ic_x.row(0), 0.0, true), value_ch);
  plan->ic_targets.resize(ic_x.cols(), n_train);
  for (long i = 0; i < n_train; ++i)
    plan->ic_targets.col(i) = data.train_fns[static_cast<size_t>(i)].eval(ic_x.row(0).transpose());

  // Periodic walls: both the value and the spatial derivative must match.
  Rng bc_rng = Rng::substream(cfg.train.seed, kStreamOpBc);
  const Eigen::MatrixXd bc_t = quasirandom_box(lo.tail(1), hi.tail(1),
                                          static_cast<int>(cfg.train.bc_points), bc_rng);
  plan->has_bc = true;
  plan->bc_lo = prep(dec, column_points(bc_t.row(0), p.x_lo, false), value_ch);
  plan->bc_hi = prep(dec, column_points(bc_t.row(0), p.x_hi, false), value_ch);
  return plan;
}

// Function rotation: full batch when fn_batch covers the set; otherwise the
// batch walks one block-class (functions sharing a point block) per step.
std::vector<long> batch_fns(long step, long fn_batch, long n_train, int n_blocks) {
  std::vector<long> idx;
  if (fn_batch >= n_train) {
    idx.resize(static_cast<size_t>(n_train));
    for (long i = 0; i < n_train; ++i) idx[static_cast<size_t>(i)] = i;
    return idx;
  }
  const long b = step % n_blocks;
  const long m = (n_train - b + n_blocks - 1) / n_blocks;  // size of class {i : i % nb == b}
  const long start = ((step / n_blocks) * fn_batch) % m;
  idx.reserve(static_cast<size_t>(fn_batch));
  for (long k = 0; k < fn_batch; ++k) idx.push_back(b + ((start + k) % m) * n_blocks);
  return idx;
}

NodeRef scaled_residual(Tape& t, const ExperimentConfig& cfg, const JetBatch& u,
                        const LossPlan& plan) {
  const ProblemConfig& p = cfg.problem;
  NodeRef r;
  if (p.id == "sinusoidal")
    r = residual_rows_sinusoidal(t, u, plan.cos_row);
  else if (p.id == "oscillator")
    r = residual_rows_oscillator(t, u, p.m, p.mu, p.k);
  else if (p.id == "allen_cahn")
    r = residual_rows_allen_cahn(t, u);
  else
    r = residual_rows_burgers(t, u, p.nu);
  if (cfg.train.residual_scale != 1.0) r = t.affine(r, cfg.train.residual_scale, 0.0);
  return r;
}

void add_term(Tape& t, NodeRef& total, double weight, NodeRef term) {
  if (weight == 0.0) return;
  total = add_maybe(t, total, weight == 1.0 ? term : t.affine(term, weight, 0.0));
}

template <class M>
LossFn pinn_loss(const ExperimentConfig& cfg, const M& model, std::shared_ptr<LossPlan> plan) {
  return [cfg, model, plan](Tape& t, NodeRef p, long) -> NodeRef {
    const StagedField f = stage(t, model, p);
    const JetBatch u = field_rows(t, f, plan->colloc[0]);
    NodeRef total;
    add_term(t, total, cfg.train.lambda_res, mean_square(t, scaled_residual(t, cfg, u, *plan)));
    const JetBatch ui = field_rows(t, f, plan->ic);
    const NodeRef ic_miss = t.sub(ui.v, t.leaf(plan->ic_targets));
    add_term(t, total, cfg.train.lambda_ic, mean_square(t, ic_miss));
    if (plan->has_bc) {
      const NodeRef ms_lo = mean_square(t, field_rows(t, f, plan->bc_lo).v);
      const NodeRef ms_hi = mean_square(t, field_rows(t, f, plan->bc_hi).v);
      add_term(t, total, cfg.train.lambda_bc, t.affine(t.add(ms_lo, ms_hi), 0.5, 0.0));
    }
    return total;
  };
}

// HyperDeepONet and the decomposed operator models share the staging API:
// hoist the hypernetwork once per step, generate one target field per
// distinct function in the batch.
template <class M>
LossFn per_function_loss(const ExperimentConfig& cfg, const M& model,
                         std::shared_ptr<LossPlan> plan, const OperatorData* data) {
  const long n_train = data->train_sensors.cols();
  return [cfg, model, plan, data, n_train](Tape& t, NodeRef p, long step) -> NodeRef {
    const auto hyper = stage_hyper(t, model, p);
    const std::vector<long> idx = batch_fns(step, cfg.train.fn_batch, n_train, plan->n_blocks);
    std::map<long, StagedField> staged;
    NodeRef sum;
    for (long i : idx) {
      auto it = staged.find(i);
      if (it == staged.end())
        it = staged.emplace(i, stage_fn(t, model, hyper, data->train_sensors.col(i))).first;
      const StagedField& f = it->second;
      const JetBatch u = field_rows(t, f, plan->colloc[static_cast<size_t>(i % plan->n_blocks)]);
      NodeRef li;
      add_term(t, li, cfg.train.lambda_res, mean_square(t, scaled_residual(t, cfg, u, *plan)));
      const JetBatch ui = field_rows(t, f, plan->ic);
      if (cfg.problem.id == "oscillator") {
        add_term(t, li, cfg.train.lambda_ic,
                 mean_square(t, t.affine(ui.v, 1.0, -data->train_ic(0, i))));
        add_term(t, li, cfg.train.lambda_ic_v,
                 mean_square(t, t.affine(ui.d1[0], 1.0, -data->train_ic(1, i))));
      } else {
        const Eigen::MatrixXd tgt = plan->ic_targets.col(i).transpose();
        add_term(t, li, cfg.train.lambda_ic, mean_square(t, t.sub(ui.v, t.leaf(tgt))));
        const JetBatch ul = field_rows(t, f, plan->bc_lo);
        const JetBatch uh = field_rows(t, f, plan->bc_hi);
        const NodeRef miss = t.add(mean_square(t, t.sub(ul.v, uh.v)),
                                   mean_square(t, t.sub(ul.d1[0], uh.d1[0])));
        add_term(t, li, cfg.train.lambda_bc, miss);
      }
      sum = add_maybe(t, sum, li);
    }
    return t.affine(sum, 1.0 / static_cast<double>(idx.size()), 0.0);
  };
}

// Branch/trunk model: the whole batch of functions rides as rows, so the
// trunk over each shared point set is evaluated once per step.
LossFn deeponet_loss(const ExperimentConfig& cfg, const DeepOnetModel& model,
                     std::shared_ptr<LossPlan> plan, const OperatorData* data) {
  const long n_train = data->train_sensors.cols();
  return [cfg, model, plan, data, n_train](Tape& t, NodeRef p, long step) -> NodeRef {
    const StagedDon sd = stage(t, model, p);
    const std::vector<long> idx = batch_fns(step, cfg.train.fn_batch, n_train, plan->n_blocks);
    const long nb = static_cast<long>(idx.size());
    auto gather = [&](const Eigen::MatrixXd& src, const std::vector<long>& cols) {
      Eigen::MatrixXd out(src.rows(), static_cast<long>(cols.size()));
      for (size_t k = 0; k < cols.size(); ++k) out.col(static_cast<long>(k)) = src.col(cols[k]);
      return out;
    };

    // Residual: group the batch by point block (a single group unless the
    // batch spans the whole training set), mean-of-means weighting by size.
    std::map<int, std::vector<long>> groups;
    for (long i : idx) groups[static_cast<int>(i % plan->n_blocks)].push_back(i);
    NodeRef res_ms;
    for (const auto& [block, fns] : groups) {
      const JetBatch trunk = trunk_rows(t, sd, plan->colloc[static_cast<size_t>(block)]);
      const JetBatch u = don_rows_batched(t, sd, trunk, gather(data->train_sensors, fns));
      const NodeRef ms = mean_square(t, scaled_residual(t, cfg, u, *plan));
      res_ms = add_maybe(t, res_ms,
                         t.affine(ms, static_cast<double>(fns.size()) / static_cast<double>(nb),
                                  0.0));
    }
    NodeRef total;
    add_term(t, total, cfg.train.lambda_res, res_ms);

    const Eigen::MatrixXd A = gather(data->train_sensors, idx);
    const JetBatch trunk_ic = trunk_rows(t, sd, plan->ic);
    const JetBatch ui = don_rows_batched(t, sd, trunk_ic, A);
    if (cfg.problem.id == "oscillator") {
      Eigen::MatrixXd u0(nb, 1), v0(nb, 1);
      for (long k = 0; k < nb; ++k) {
        u0(k, 0) = data->train_ic(0, idx[static_cast<size_t>(k)]);
        v0(k, 0) = data->train_ic(1, idx[static_cast<size_t>(k)]);
      }
      add_term(t, total, cfg.train.lambda_ic, mean_square(t, t.sub(ui.v, t.leaf(u0))));
      add_term(t, total, cfg.train.lambda_ic_v, mean_square(t, t.sub(ui.d1[0], t.leaf(v0))));
    } else {
      Eigen::MatrixXd tgt(nb, plan->ic_targets.rows());
      for (long k = 0; k < nb; ++k)
        tgt.row(k) = plan->ic_targets.col(idx[static_cast<size_t>(k)]).transpose();
      add_term(t, total, cfg.train.lambda_ic, mean_square(t, t.sub(ui.v, t.leaf(tgt))));
      const JetBatch ul = don_rows_batched(t, sd, trunk_rows(t, sd, plan->bc_lo), A);
      const JetBatch uh = don_rows_batched(t, sd, trunk_rows(t, sd, plan->bc_hi), A);
      const NodeRef miss = t.add(mean_square(t, t.sub(ul.v, uh.v)),
                                 mean_square(t, t.sub(ul.d1[0], uh.d1[0])));
      add_term(t, total, cfg.train.lambda_bc, miss);
    }
    return total;
  };
}

LossFn make_loss(const ExperimentConfig& cfg, const AnyModel& model, const OperatorData* data) {
  return std::visit(
      overloaded{
          [&](const FbPinnModel& m) -> LossFn { return pinn_loss(cfg, m, pinn_plan(cfg, m.dec)); },
          [&](const FbHyPinnModel& m) -> LossFn {
            return pinn_loss(cfg, m, pinn_plan(cfg, m.dec));
          },
          [&](const DeepOnetModel& m) -> LossFn {
            return deeponet_loss(cfg, m, operator_plan(cfg, *data, nullptr), data);
          },
          [&](const HyperDeepOnetModel& m) -> LossFn {
            return per_function_loss(cfg, m, operator_plan(cfg, *data, nullptr), data);
          },
          [&](const FbHyDonModel& m) -> LossFn {
            return per_function_loss(cfg, m, operator_plan(cfg, *data, &m.dec), data);
          },
      },
      model);
}

}  // namespace

TrainResult train_model(const ExperimentConfig& cfg, const AnyModel& model,
                        const OperatorData* data,
                        const std::function<double(const Eigen::VectorXd&, long)>& eval) {
  if (operator_problem(cfg.problem.id) && data == nullptr)
    throw std::invalid_argument("train_model: operator problems require data");
  if (cfg.train.fn_batch < 1) cfg_fail("train.fn_batch must be positive");
  TrainOptions opt;
  opt.steps = cfg.train.steps;
  opt.lr = LrSchedule{cfg.train.lr, cfg.train.decay, cfg.train.decay_period};
  opt.clip = cfg.train.clip;
  opt.log_every = cfg.train.log_every;
  opt.eval_every = cfg.train.eval_every;
  const LossFn loss = make_loss(cfg, model, data);
  FlatParams p0 = any_init(model, cfg.train.seed);
  return train_adam(std::move(p0.values), opt, loss, eval);
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

Eigen::RowVectorXd predict_any(const AnyModel& model, const FlatParams& p,
                               const Eigen::VectorXd* a, const Eigen::MatrixXd& pts) {
  return std::visit(overloaded{
                        [&](const FbPinnModel& m) { return predict(m, p, pts); },
                        [&](const FbHyPinnModel& m) { return predict(m, p, pts); },
                        [&](const DeepOnetModel& m) { return predict(m, p, *a, pts); },
                        [&](const HyperDeepOnetModel& m) { return predict(m, p, *a, pts); },
                        [&](const FbHyDonModel& m) { return predict(m, p, *a, pts); },
                    },
                    model);
}

}  // namespace

Evaluation evaluate_model(const ExperimentConfig& cfg, const AnyModel& model,
                          const FlatParams& p, const OperatorData* data) {
  const ProblemConfig& prob = cfg.problem;
  Evaluation ev;

  if (prob.id == "sinusoidal" || prob.id == "burgers") {
    Eigen::MatrixXd pts;
    Eigen::RowVectorXd truth;
    if (prob.id == "sinusoidal") {
      const Eigen::VectorXd xs = linspace(prob.x_lo, prob.x_hi, cfg.eval.n_points);
      pts = xs.transpose();
      truth.resize(xs.size());
      for (Eigen::Index i = 0; i < xs.size(); ++i) truth[i] = exact_sinusoidal(xs[i], prob.omega);
    } else {
      const Eigen::VectorXd xs = linspace(prob.x_lo, prob.x_hi, cfg.eval.nx);
      const Eigen::VectorXd ts = linspace(0.0, prob.t_hi, cfg.eval.nt);
      pts = tensor_grid(xs, ts);
      truth.resize(pts.cols());
      for (Eigen::Index k = 0; k < pts.cols(); ++k)
        truth[k] = cole_hopf_burgers(pts(0, k), pts(1, k), prob.nu);
    }
    ev.pred = predict_any(model, p, nullptr, pts);
    ev.truth = truth;
    ev.pts = std::move(pts);
    ev.rel_l2 = rel_l2(ev.pred, ev.truth);
    ev.mae = mae(ev.pred, ev.truth);
    return ev;
  }

  if (data == nullptr)
    throw std::invalid_argument("evaluate_model: operator problems require data");
  const long n_test = data->test_sensors.cols();
  if (n_test < 1) cfg_fail("evaluation needs at least one test function (data.n_test >= 1)");

  Eigen::MatrixXd pts;
  if (prob.id == "oscillator") {
    pts = linspace(0.0, prob.t_hi, cfg.eval.n_points).transpose();
  } else {
    pts = tensor_grid(data->ref_x, data->ref_t);
  }
  const Eigen::Index n_pts = pts.cols();
  double abs_sum = 0.0;
  for (long j = 0; j < n_test; ++j) {
    const Eigen::VectorXd a = data->test_sensors.col(j);
    const Eigen::RowVectorXd pred = predict_any(model, p, &a, pts);
    Eigen::RowVectorXd truth(n_pts);
    if (prob.id == "oscillator") {
      for (Eigen::Index i = 0; i < n_pts; ++i)
        truth[i] = exact_oscillator(pts(0, i), data->test_ic(0, j), data->test_ic(1, j), prob.m,
                                    prob.mu, prob.k);
    } else {
      const Eigen::MatrixXd& u = data->test_refs[static_cast<size_t>(j)];
      for (Eigen::Index i = 0; i < u.rows(); ++i)
        for (Eigen::Index k = 0; k < u.cols(); ++k) truth[i * u.cols() + k] = u(i, k);
    }
    ev.per_function.push_back(rel_l2(pred, truth));
    abs_sum += (pred - truth).cwiseAbs().sum();
    if (j == 0) {
      ev.pred = pred;
      ev.truth = truth;
    }
  }
  ev.pts = std::move(pts);
  double rel_sum = 0.0;
  for (double r : ev.per_function) rel_sum += r;
  ev.rel_l2 = rel_sum / static_cast<double>(n_test);
  ev.mae = abs_sum / static_cast<double>(n_test * n_pts);
  return ev;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
  if (!out) io_fail("cannot write " + path.string());
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::string s = "step,loss,lr,grad_norm,eval_metric\n";
  for (const HistoryRow& r : rows) {
    s += std::to_string(r.step) + "," + fmt_g(r.loss) + "," + fmt_g(r.lr) + "," +
         fmt_g(r.grad_norm) + ",";
    if (r.has_eval) s += fmt_g(r.eval_metric);
    s += "\n";
  }
  return s;
}

std::string field_csv(const Evaluation& ev) {
  const bool two_d = ev.pts.rows() == 2;
  std::string s = two_d ? "x,t,pred,truth,abs_err\n" : "x,pred,truth,abs_err\n";
  for (Eigen::Index k = 0; k < ev.pts.cols(); ++k) {
    s += fmt_g(ev.pts(0, k)) + ",";
    if (two_d) s += fmt_g(ev.pts(1, k)) + ",";
    s += fmt_g(ev.pred[k]) + "," + fmt_g(ev.truth[k]) + "," +
         fmt_g(std::abs(ev.pred[k] - ev.truth[k])) + "\n";
  }
  return s;
}

// Wall time lives here and only here; every other artifact is byte-stable
// across same-seed reruns.
std::string run_log(const ExperimentConfig& cfg, const MetricsReport& rep,
                    const std::string& note) {
  std::string s = "problem=" + cfg.problem.id + " model=" + cfg.model.id + "\n";
  s += "param_count=" + std::to_string(rep.param_count) + "\n";
  s += "steps=" + std::to_string(cfg.train.steps) + "\n";
  if (!note.empty()) s += note + "\n";
  s += "final_loss=" + fmt_g(rep.final_loss) + "\n";
  s += "rel_l2=" + fmt_g(rep.rel_l2) + "\n";
  s += "mae=" + fmt_g(rep.mae) + "\n";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", rep.wall_seconds);
  s += "wall_seconds=" + std::string(buf) + "\n";
  return s;
}

}  // namespace

std::string metrics_json(const MetricsReport& report, const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["problem"] = cfg.problem.id;
  j["model"] = cfg.model.id;
  j["param_count"] = report.param_count;
  j["rel_l2"] = report.rel_l2;
  j["mae"] = report.mae;
  j["per_function"] = report.per_function;
  j["final_loss"] = report.final_loss;
  j["config"] = nlohmann::ordered_json::parse(report.config_echo);
  return j.dump(2) + "\n";
}

MetricsReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) io_fail("cannot create output directory " + out_dir + ": " + ec.message());

  const AnyModel model = build_model(cfg);
  std::unique_ptr<OperatorData> data;
  if (operator_problem(cfg.problem.id))
    data = std::make_unique<OperatorData>(load_operator_data(cfg));
  FlatParams params = any_init(model, cfg.train.seed);

  MetricsReport rep;
  rep.param_count = params.size();
  rep.config_echo = dump_config(cfg);

  std::function<double(const Eigen::VectorXd&, long)> eval_cb;
  if (cfg.train.eval_every > 0) {
    eval_cb = [&](const Eigen::VectorXd& values, long) {
      FlatParams fp = params;
      fp.values = values;
      return evaluate_model(cfg, model, fp, data.get()).rel_l2;
    };
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  TrainResult res;
  try {
    res = train_model(cfg, model, data.get(), eval_cb);
  } catch (const DivergenceError& e) {
    rep.wall_seconds = elapsed();
    rep.final_loss = std::numeric_limits<double>::quiet_NaN();
    write_text(dir / "history.csv", history_csv(e.history));
    write_text(dir / "run.log",
               run_log(cfg, rep, "diverged at step " + std::to_string(e.step) + ": " + e.what()));
    throw;
  }
  rep.wall_seconds = elapsed();
  rep.final_loss = res.final_loss;

  params.values = res.params;
  const Evaluation ev = evaluate_model(cfg, model, params, data.get());
  rep.rel_l2 = ev.rel_l2;
  rep.mae = ev.mae;
  rep.per_function = ev.per_function;

  write_text(dir / "metrics.json", metrics_json(rep, cfg));
  write_text(dir / "history.csv", history_csv(res.history));
  write_text(dir / "field.csv", field_csv(ev));
  save_checkpoint((dir / "model.fbhc").string(), params);
  write_text(dir / "run.log", run_log(cfg, rep, ""));
  return rep;
}

MetricsReport eval_checkpoint(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
  const AnyModel model = build_model(cfg);
  std::unique_ptr<OperatorData> data;
  if (operator_problem(cfg.problem.id))
    data = std::make_unique<OperatorData>(load_operator_data(cfg));
  const FlatParams layout = any_init(model, cfg.train.seed);
  const FlatParams params = load_checkpoint(checkpoint_path, layout_hash(layout));
  const Evaluation ev = evaluate_model(cfg, model, params, data.get());
  MetricsReport rep;
  rep.rel_l2 = ev.rel_l2;
  rep.mae = ev.mae;
  rep.per_function = ev.per_function;
  rep.param_count = params.size();
  rep.config_echo = dump_config(cfg);
  return rep;
}

// ---------------------------------------------------------------------------
// Subdomain-count sweep

std::vector<StudyRow> subdomain_study(const ExperimentConfig& base,
                                      const std::vector<std::vector<int>>& counts,
                                      const std::string& out_dir) {
  std::vector<StudyRow> rows;
  for (const std::vector<int>& cv : counts) {
    ExperimentConfig cfg = base;
    cfg.model.subdomains = cv;
    int total = 1;
    for (int c : cv) total *= c;
    const MetricsReport rep =
        run_experiment(cfg, (fs::path(out_dir) / ("j" + std::to_string(total))).string());
    rows.push_back(StudyRow{total, rep.rel_l2, rep.mae});
  }
  std::string csv = "total_j,rel_l2,mae\n";
  for (const StudyRow& r : rows)
    csv += std::to_string(r.total_j) + "," + fmt_g(r.rel_l2) + "," + fmt_g(r.mae) + "\n";
  write_text(fs::path(out_dir) / "study.csv", csv);
  write_text(fs::path(out_dir) / "study.txt", study_table(rows));
  return rows;
}

std::string study_table(const std::vector<StudyRow>& rows) {
  std::string s = "   J       rel_l2          mae\n";
  for (const StudyRow& r : rows) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "%4d   %12.6e   %12.6e\n", r.total_j, r.rel_l2, r.mae);
    s += buf;
  }
  return s;
}

}  // namespace fbh
