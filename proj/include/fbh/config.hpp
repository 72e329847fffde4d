#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbh {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProblemConfig {
  std::string id;  // sinusoidal | oscillator | burgers | burgers_operator | allen_cahn
  double omega = 15.0;              // sinusoidal forcing frequency
  double nu = 0.01 / 3.14159265358979323846;  // viscosity (burgers*)
  double m = 1.0, mu = 4.0, k = 6400.0;       // oscillator coefficients
  double x_lo = 0.0, x_hi = 0.0;    // spatial domain (defaulted per problem)
  double t_hi = 1.0;                // time domain [0, t_hi]
};

struct ModelConfig {
  std::string id;  // fbpinn | fb_hypinn | deeponet | hyperdeeponet | fb_hydon | fb_hydon2
  std::vector<int> subdomains;      // per-dimension counts
  double overlap = 1.8;             // widths = overlap * spacing
  std::vector<int> target_hidden;
  std::vector<int> hyper_hidden;
  std::vector<int> hyper2_hidden;   // fb_hydon2 domain hypernetwork
  std::vector<int> branch_hidden;
  std::vector<int> trunk_hidden;
  int n_chunks = 6;
  int latent = 100;                 // deeponet latent width
  int sensors = 40;
};

struct TrainConfig {
  long steps = 1000;
  double lr = 1e-3;
  double decay = 1.0;
  long decay_period = 1000;
  std::uint64_t seed = 0;
  long collocation = 1000;          // full-batch residual points (PINN runs)
  long ic_points = 100;
  long bc_points = 100;
  long fn_batch = 5;                // operator runs: functions per step
  long colloc_per_fn = 2500;        // operator runs: residual points per function
  double lambda_res = 1.0, lambda_ic = 1.0, lambda_bc = 1.0, lambda_ic_v = 1.0;
  double residual_scale = 1.0;      // residual premultiplier (e.g. 1/k)
  double clip = 1000.0;             // gradient-norm clip; <= 0 disables
  long eval_every = 0;
  long log_every = 100;
};

struct DataConfig {
  long n_train = 1000;
  long n_test = 100;
  std::uint64_t seed = 0;
  std::string path;  // dataset bundle location (operator problems)
};

struct EvalConfig {
  int nx = 400;
  int nt = 400;       // space-time grids
  int n_points = 1000;  // 1D problems
};

struct ExperimentConfig {
  ProblemConfig problem;
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;
};

/// Parses and validates a config; unknown keys anywhere are errors, as are
/// missing required keys ("problem.id", "model.id") and malformed values.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);  // ConfigError on I/O too

/// Canonical JSON rendering with every field explicit; parsing it back gives
/// an equal config, and equal configs render to identical bytes.
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace fbh
