// Command-line front end: train / eval / dataset / oracle.
//
// Exit codes: 0 success, 2 config or usage error, 3 divergence or solver
// instability, 4 I/O error. FBH_OUT_ROOT sets the root directory for train
// outputs (default "runs"); --out overrides it per invocation.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fbh/config.hpp"
#include "fbh/dataset.hpp"
#include "fbh/experiment.hpp"
#include "fbh/grf.hpp"
#include "fbh/problems.hpp"
#include "fbh/rng.hpp"
#include "fbh/spectral.hpp"
#include "fbh/training.hpp"
#include "fbh/cole_hopf.hpp"

namespace {

std::string out_root() {
  const char* env = std::getenv("FBH_OUT_ROOT");
  return env && *env ? env : "runs";
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int run_train(const std::string& config_path, const std::string& out_override) {
  const fbh::ExperimentConfig cfg = fbh::load_config(config_path);
  std::string dir = out_override;
  if (dir.empty()) {
    const std::string stem = std::filesystem::path(config_path).stem().string();
    dir = (std::filesystem::path(out_root()) / stem).string();
  }
  const fbh::MetricsReport rep = fbh::run_experiment(cfg, dir);
  std::cout << fbh::metrics_json(rep, cfg);
  std::cerr << "artifacts written to " << dir << "\n";
  return 0;
}

int run_eval(const std::string& config_path, const std::string& checkpoint) {
  const fbh::ExperimentConfig cfg = fbh::load_config(config_path);
  const fbh::MetricsReport rep = fbh::eval_checkpoint(cfg, checkpoint);
  std::cout << fbh::metrics_json(rep, cfg);
  return 0;
}

int run_dataset(const std::string& problem, long n_train, long n_test, std::uint64_t seed,
                const std::string& out) {
  fbh::generate_dataset(problem, n_train, n_test, seed, out);
  std::cerr << "dataset written to " << out << "\n";
  return 0;
}

// Direct reference-solver queries. Closed-form problems print one value;
// operator problems draw the indexed training-stream input function, solve
// it, and dump the field as CSV.
int run_oracle(const std::string& problem, double x, double t, bool has_x, bool has_t, double u0,
               double v0, double omega, double nu, bool has_nu, std::uint64_t seed, long index,
               int nx, int nt, const std::string& out) {
  if (problem == "sinusoidal") {
    if (!has_x) throw fbh::ConfigError("oracle sinusoidal requires --x");
    std::cout << fmt_g(fbh::exact_sinusoidal(x, omega)) << "\n";
    return 0;
  }
  if (problem == "oscillator") {
    if (!has_t) throw fbh::ConfigError("oracle oscillator requires --t");
    std::cout << fmt_g(fbh::exact_oscillator(t, u0, v0, 1.0, 4.0, 6400.0)) << "\n";
    return 0;
  }
  if (problem == "burgers") {
    if (!has_x || !has_t) throw fbh::ConfigError("oracle burgers requires --x and --t");
    std::cout << fmt_g(fbh::cole_hopf_burgers(x, t, has_nu ? nu : 0.01 / M_PI)) << "\n";
    return 0;
  }
  if (problem != "burgers_operator" && problem != "allen_cahn")
    throw fbh::ConfigError("oracle: unknown problem '" + problem + "'");
  if (out.empty()) throw fbh::ConfigError("oracle " + problem + " requires --out");

  const double lo = problem == "burgers_operator" ? 0.0 : -1.0;
  const double length = problem == "burgers_operator" ? 1.0 : 2.0;
  fbh::GrfSampler sampler;
  sampler.lo = lo;
  sampler.length = length;
  fbh::Rng rng = fbh::Rng::substream(seed, 2 * static_cast<std::uint64_t>(index));
  const fbh::GrfSample fn = fbh::sample_grf(sampler, rng);

  const int fine = 2 * nx;
  Eigen::VectorXd a(fine);
  for (int i = 0; i < fine; ++i) a[i] = fn.eval(lo + length * i / fine);
  fbh::SpectralConfig scfg;
  const double snap_dt = 1.0 / (nt - 1);
  const long per_snap = std::max(1L, static_cast<long>(std::ceil(snap_dt / 2e-4 - 1e-9)));
  scfg.dt = snap_dt / static_cast<double>(per_snap);
  scfg.n_snapshots = nt;
  const fbh::ReferenceSolution full =
      problem == "burgers_operator"
          ? fbh::burgers_reference(a, lo, length, has_nu ? nu : 0.01, scfg)
          : fbh::allen_cahn_reference(a, lo, length, scfg);

  std::ofstream f(out, std::ios::binary);
  f << "x,t,u\n";
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < nt; ++j)
      f << fmt_g(full.x[2 * i]) << "," << fmt_g(full.t[j]) << "," << fmt_g(full.u(2 * i, j))
        << "\n";
  if (!f) throw fbh::IoError("cannot write " + out);
  std::cerr << "reference field written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-basis physics-informed operator learning"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train a model and write run artifacts");
  std::string train_config, train_out;
  train->add_option("--config", train_config, "experiment config (JSON)")->required();
  train->add_option("--out", train_out, "output directory (default: $FBH_OUT_ROOT/<config stem>)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint against a config's test target");
  std::string eval_config, eval_ckpt;
  eval->add_option("--config", eval_config, "experiment config (JSON)")->required();
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file (.fbhc)")->required();

  auto* dataset = app.add_subcommand("dataset", "generate an operator-learning dataset");
  std::string ds_problem, ds_out;
  long ds_train = 1000, ds_test = 100;
  std::uint64_t ds_seed = 0;
  dataset->add_option("--problem", ds_problem, "oscillator | burgers_operator | allen_cahn")
      ->required();
  dataset->add_option("--seed", ds_seed, "dataset seed")->required();
  dataset->add_option("--out", ds_out, "output bundle path")->required();
  dataset->add_option("--n-train", ds_train, "training functions (default 1000)");
  dataset->add_option("--n-test", ds_test, "test functions (default 100)");

  auto* oracle = app.add_subcommand("oracle", "query a reference solver directly");
  std::string or_problem, or_out;
  double or_x = 0, or_t = 0, or_u0 = 1.0, or_v0 = 0.0, or_omega = 15.0, or_nu = 0.0;
  std::uint64_t or_seed = 0;
  long or_index = 0;
  int or_nx = 128, or_nt = 100;
  oracle->add_option("--problem", or_problem, "problem id")->required();
  auto* ox = oracle->add_option("--x", or_x, "spatial query point");
  auto* ot = oracle->add_option("--t", or_t, "temporal query point");
  oracle->add_option("--u0", or_u0, "oscillator initial displacement");
  oracle->add_option("--v0", or_v0, "oscillator initial velocity");
  oracle->add_option("--omega", or_omega, "sinusoidal frequency");
  auto* onu = oracle->add_option("--nu", or_nu, "viscosity");
  oracle->add_option("--seed", or_seed, "input-function stream seed");
  oracle->add_option("--index", or_index, "input-function index");
  oracle->add_option("--nx", or_nx, "output spatial resolution");
  oracle->add_option("--nt", or_nt, "output snapshots");
  oracle->add_option("--out", or_out, "CSV output path (operator problems)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return run_train(train_config, train_out);
    if (eval->parsed()) return run_eval(eval_config, eval_ckpt);
    if (dataset->parsed()) return run_dataset(ds_problem, ds_train, ds_test, ds_seed, ds_out);
    return run_oracle(or_problem, or_x, or_t, ox->count() > 0, ot->count() > 0, or_u0, or_v0,
                      or_omega, or_nu, onu->count() > 0, or_seed, or_index, or_nx, or_nt, or_out);
  } catch (const fbh::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const fbh::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << " (step " << e.step << ")\n";
    return 3;
  } catch (const fbh::InstabilityError& e) {
    std::cerr << "reference solver unstable: " << e.what() << "\n";
    return 3;
  } catch (const fbh::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
