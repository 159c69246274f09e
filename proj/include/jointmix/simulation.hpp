#pragma once

// Data generation from the joint model and the Monte Carlo harness for
// Wald-interval coverage of the fitted parameters.

#include "jointmix/em_engine.hpp"
#include "jointmix/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace jointmix {

// Piecewise-constant baseline hazard: rates[k] on [cuts[k-1], cuts[k]) with
// cuts[-1] = 0 and the last rate extending to infinity. A constant hazard has
// no cuts and a single rate.
struct BaselineHazard {
  std::vector<double> cuts;
  std::vector<double> rates{0.1};

  static BaselineHazard constant(double rate) { return {{}, {rate}}; }
  double rate_at(double t) const;
  double cumulative(double t) const;
  // Smallest t with cumulative(t) = target.
  double inverse_cumulative(double target) const;
};

struct Censoring {
  enum class Kind { none, uniform, exponential };
  Kind kind = Kind::uniform;
  double parameter = 1.0;  // c_max for uniform, rate for exponential
};

struct CovariateDist {
  enum class Kind { normal, two_point };
  Kind kind = Kind::normal;
  double p = 0.5;  // P(X = 1) for the two-point law on {0, 1}
};

struct SimDesign {
  int n = 500;
  int groups = 2;
  int levels = 3;
  int items = 2;
  int times = 3;  // time points per subject
  ModelParams truth;
  BaselineHazard baseline;
  Censoring censoring;
  CovariateDist covariate;
  double missing_prob = 0.0;  // MCAR probability that a cell is unobserved
  std::uint64_t seed = 1;
};

// Throws InputError. The generating pi may contain zeros; theta must start at
// 0 and be nondecreasing.
void validate(const SimDesign& design);

// Expected fraction of censored subjects under the design's censoring law.
double expected_censoring(const SimDesign& design);
// c_max of uniform[0, c_max] censoring giving the target censored fraction.
double tune_uniform_censoring(const SimDesign& design, double target);

// R=2, L=3, J=2, M=3, n=500, pi=(0.4,0.6), theta=(0,1), delta=(0.5,-0.5),
// constant baseline 0.1, standard normal X, uniform censoring tuned to 25%.
SimDesign default_design();

struct SimulatedData {
  Dataset data;
  std::vector<int> labels;  // zero-based latent groups
  double censored_fraction = 0.0;
  std::vector<std::string> warnings;
};

SimulatedData generate_dataset(const SimDesign& design);

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double mean_se = 0.0;
  double sd_se_ratio = 0.0;
  double coverage = 0.0;  // fraction of 95% Wald intervals containing truth
};

struct ReplicationRecord {
  int index = 0;
  std::uint64_t seed = 0;
  bool success = false;
  bool converged = false;
  int n_iter = 0;
  double loglik = 0.0;
  double censored_fraction = 0.0;
  Eigen::VectorXd estimates;
  Eigen::VectorXd std_errors;
  std::string message;
};

struct MCReport {
  int replications = 0;
  int failures = 0;
  bool failure_flag = false;  // failures above 10% of replications
  std::uint64_t seed = 0;
  std::vector<ParameterSummary> parameters;
  std::vector<ReplicationRecord> records;
};

struct MCOptions {
  EMConfig fit;               // fit.threads sets the number of replication workers
  bool init_at_truth = true;  // first restart starts from the generating values
};

MCReport mc_normality(const SimDesign& design, int replications, const MCOptions& options);

}  // namespace jointmix
