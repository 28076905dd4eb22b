#ifndef FUNADD_SIMGEN_HPP
#define FUNADD_SIMGEN_HPP

#include <functional>
#include <string>
#include <vector>

#include "funadd/baselines.hpp"
#include "funadd/fit.hpp"

namespace funadd {

enum class Design { linear_wellspaced, linear_closelyspaced, nonlinear_cos, nonlinear_texp };

Design design_from_string(const std::string& name);
std::string design_to_string(Design design);
bool is_linear_design(Design design);

/// One simulation scenario. RNG is mt19937_64; replication r draws from
/// seed + r, so datasets are bitwise reproducible within this implementation.
struct ExperimentConfig {
  Design design = Design::linear_wellspaced;
  double nu = 1.1;       // linear designs only
  double sigma = 0.5;    // noise sd
  int n_train = 67;
  int n_test = 33;
  int grid_size = 101;
  int replications = 200;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One replication: train and test sets plus the noiseless responses
/// eta0(X_i) from the generator (used by the rate study).
struct SimulatedData {
  CurveDataset train;
  CurveDataset test;
  Eigen::VectorXd train_eta0;
  Eigen::VectorXd test_eta0;
};

/// Eigen-coefficient sequences of the linear-design curve expansion
/// (1-based index k stored at position k-1, truncated at k = 50).
std::vector<double> well_spaced_zeta(double nu);
std::vector<double> closely_spaced_zeta(double nu);

/// True slope function of the linear designs evaluated on a grid.
Eigen::VectorXd beta0_values(const TimeGrid& grid);

/// Nonlinear-design curve value at time t in [0,10] for phase draws u1, u2.
double nonlinear_curve_value(double u1, double u2, double t);

/// Noiseless response of a nonlinear design for a curve stored on the unit
/// grid (time t = 10 s).
double nonlinear_eta0(Design design, const TimeGrid& unit_grid, const Eigen::VectorXd& values);

SimulatedData gen_linear_design(const ExperimentConfig& config, std::uint64_t seed);
SimulatedData gen_nonlinear_design(const ExperimentConfig& config, std::uint64_t seed);
SimulatedData generate_replication(const ExperimentConfig& config, std::uint64_t seed);

double rmspe(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual);

enum class Method { thinspline, flr, fpca };
Method method_from_string(const std::string& name);
std::string method_to_string(Method method);

struct RmspeSummary {
  std::string method;
  double mean = 0;
  double sd = 0;
  std::vector<double> per_rep;
  int failures = 0;
};

/// A method under test: fits on train, returns predictions on test.
using MethodRunner =
    std::function<Eigen::VectorXd(const CurveDataset& train, const CurveDataset& test)>;

MethodRunner make_method_runner(Method method, int threads);

/// Replication driver. Per-replication failures are recorded and skipped;
/// more than 5% failures for a method raises an error.
std::vector<RmspeSummary> run_replications(const ExperimentConfig& config,
                                           const std::vector<std::pair<std::string, MethodRunner>>& methods);
std::vector<RmspeSummary> run_experiment(const ExperimentConfig& config,
                                         const std::vector<Method>& methods, int threads = 1);

std::string results_to_csv(const ExperimentConfig& config,
                           const std::vector<RmspeSummary>& summaries);
std::string summary_to_csv(const ExperimentConfig& config,
                           const std::vector<RmspeSummary>& summaries);

struct RatePoint {
  int n;
  double mean_excess_risk;
};

struct RateResult {
  std::vector<RatePoint> points;
  double loglog_slope = 0;
};

/// Empirical excess risk of a method: average of (etahat(X) - eta0(X))^2 over
/// a fresh test set, per training size.
RateResult rate_study(const ExperimentConfig& base, const std::vector<int>& n_list,
                      int replications, std::uint64_t seed, int threads = 1,
                      Method method = Method::thinspline);
std::string rate_to_csv(const RateResult& result);

}  // namespace funadd

#endif  // FUNADD_SIMGEN_HPP
