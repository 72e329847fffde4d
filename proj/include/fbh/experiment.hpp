#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "fbh/config.hpp"
#include "fbh/grf.hpp"
#include "fbh/models.hpp"
#include "fbh/training.hpp"

namespace fbh {

using AnyModel =
    std::variant<FbPinnModel, FbHyPinnModel, DeepOnetModel, HyperDeepOnetModel, FbHyDonModel>;

/// Assembles the concrete model for a config. Throws ConfigError when the
/// model does not fit the problem (decomposed PINNs for sinusoidal/burgers,
/// operator models for the rest), when a required architecture list is
/// missing, or when the decomposition does not match the domain dimension.
/// The oscillator's input function is its IC pair, so its sensor count is
/// fixed at 2 regardless of model.sensors.
AnyModel build_model(const ExperimentConfig& cfg);

long any_param_count(const AnyModel& m);
FlatParams any_init(const AnyModel& m, std::uint64_t seed);

/// Everything an operator run needs beyond the config: input functions with
/// their sensor readouts, and held-out test functions with reference
/// solutions on the evaluation grid.
struct OperatorData {
  std::string problem;
  Eigen::MatrixXd train_sensors;  // n_sensors x n_train
  Eigen::MatrixXd test_sensors;   // n_sensors x n_test
  std::vector<GrfSample> train_fns;  // burgers_operator / allen_cahn inputs
  std::vector<GrfSample> test_fns;
  Eigen::MatrixXd train_ic;  // oscillator [u0; v0] columns
  Eigen::MatrixXd test_ic;
  Eigen::VectorXd ref_x;  // reference grid (PDE problems, n_test > 0)
  Eigen::VectorXd ref_t;
  std::vector<Eigen::MatrixXd> test_refs;  // one nx x nt field per test fn
};

/// Synthesizes the data in memory from cfg.data (counts, seed). Input
/// function i draws from Rng::substream(seed, 2i) for training and
/// substream(seed, 2j+1) for test, so sets are independent and stable under
/// count changes. Reference solves that blow up rethrow InstabilityError
/// tagged with the function index.
OperatorData make_operator_data(const ExperimentConfig& cfg);

/// make_operator_data when cfg.data.path is empty; otherwise loads the
/// bundle at that path. Throws IoError when the file is missing, malformed,
/// or was generated for a different problem/viscosity/sensor count.
OperatorData load_operator_data(const ExperimentConfig& cfg);

/// Builds the same content as make_operator_data and persists it as an
/// array bundle. Regeneration with equal arguments is byte-identical;
/// n_test = 0 writes no reference solutions.
void generate_dataset(const std::string& problem, long n_train, long n_test, std::uint64_t seed,
                      const std::string& out_path);

/// Trains per the config's problem/model/train sections. `data` must be
/// non-null for operator problems and is ignored otherwise. The optional
/// eval callback is forwarded to the training loop (post-update parameters,
/// cadence train.eval_every).
TrainResult train_model(const ExperimentConfig& cfg, const AnyModel& model,
                        const OperatorData* data,
                        const std::function<double(const Eigen::VectorXd&, long)>& eval = {});

struct Evaluation {
  double rel_l2 = 0.0;
  double mae = 0.0;
  std::vector<double> per_function;  // operator problems: per-test-fn rel. L2
  Eigen::MatrixXd pts;               // field-dump grid, dim x N
  Eigen::RowVectorXd pred, truth;    // field-dump rows over pts
};

/// Scores trained parameters on the problem's test target: exact solutions
/// for sinusoidal/oscillator, the closed-form quadrature solution for the
/// burgers PINN grid, reference solutions for operator problems (rel_l2 is
/// the mean of per-function ratios). The field rows hold the first test
/// function for operator problems and the full grid otherwise.
Evaluation evaluate_model(const ExperimentConfig& cfg, const AnyModel& model,
                          const FlatParams& p, const OperatorData* data);

struct MetricsReport {
  double rel_l2 = 0.0;
  double mae = 0.0;
  std::vector<double> per_function;
  long param_count = 0;
  double final_loss = 0.0;
  double wall_seconds = 0.0;
  std::string config_echo;  // canonical config rendering
};

/// The metrics file body: problem/model ids, parameter count, metrics,
/// per-function breakdown, final loss, and the config echo. Equal reports
/// render to identical bytes; wall time is deliberately excluded (it lives
/// in run.log) so same-seed reruns produce identical files.
std::string metrics_json(const MetricsReport& report, const ExperimentConfig& cfg);

/// Train, evaluate, and persist into out_dir: metrics.json, history.csv,
/// field.csv (x[,t],pred,truth,abs_err), model.fbhc, run.log. On divergence
/// the partial history and log are written before the error is rethrown.
MetricsReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

/// Scores an existing checkpoint without training. Throws IoError when the
/// checkpoint does not match the model layout implied by the config.
MetricsReport eval_checkpoint(const ExperimentConfig& cfg, const std::string& checkpoint_path);

// ---------------------------------------------------------------------------
// Subdomain-count sweep: the same config trained at several decompositions.
// Hypernetwork-generated layouts keep their parameter count fixed across
// rows, which is what makes the comparison meaningful.

struct StudyRow {
  int total_j = 0;
  double rel_l2 = 0.0;
  double mae = 0.0;
};

/// Runs the base config once per per-dimension count vector (artifacts land
/// in out_dir/j<J>/) and writes out_dir/study.csv.
std::vector<StudyRow> subdomain_study(const ExperimentConfig& base,
                                      const std::vector<std::vector<int>>& counts,
                                      const std::string& out_dir);

/// Fixed-width text table of a study's rows.
std::string study_table(const std::vector<StudyRow>& rows);

}  // namespace fbh
