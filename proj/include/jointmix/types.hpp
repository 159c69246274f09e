#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <vector>

namespace jointmix {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One observed ordinal answer. All indices are zero-based: item in [0, J),
// level in [0, L). time is the protocol time point and only identifies the cell.
struct OrdinalCell {
  int item = 0;
  int time = 0;
  int level = 0;
};

// Long-format responses of one subject. Missing (item, time) cells are absent.
struct ResponseSet {
  std::vector<OrdinalCell> cells;
};

struct SurvivalRecord {
  double time = 0.0;
  int event = 0;  // 1 = observed failure, 0 = censored
  double covariate = 0.0;
};

struct Subject {
  std::string id;
  ResponseSet responses;
  SurvivalRecord survival;
};

struct Dataset {
  int levels = 0;  // L
  int items = 0;   // J
  std::vector<Subject> subjects;

  std::size_t size() const { return subjects.size(); }
};

// Stereotype-model parameters. a[0] = b[0] = phi[0] = 0 and phi[L-1] = 1.
struct OrdinalParams {
  Eigen::VectorXd a;    // length L
  Eigen::VectorXd phi;  // length L, nondecreasing
  Eigen::VectorXd b;    // length J
};

struct SurvivalParams {
  double delta0 = 0.0;  // coefficient on the latent group effect
  double delta1 = 0.0;  // coefficient on the covariate
};

struct ModelParams {
  Eigen::VectorXd theta;  // length R, theta[0] = 0
  OrdinalParams ordinal;
  SurvivalParams survival;
  Eigen::VectorXd pi;  // mixture weights on the open simplex

  int groups() const { return static_cast<int>(theta.size()); }
};

// Baseline hazard as jumps at ordered observed times. Censored-only times
// carry a zero jump.
struct HazardSteps {
  std::vector<double> times;
  std::vector<double> jumps;
};

// n x R responsibilities; each row lies on the simplex.
struct Posterior {
  RowMatrix gamma;

  Eigen::Index subjects() const { return gamma.rows(); }
  Eigen::Index groups() const { return gamma.cols(); }
};

void validate(const ResponseSet& responses, int items, int levels);
void validate(const SurvivalRecord& record);
void validate(const Dataset& data);
void validate(const ModelParams& params, int levels, int items);

// Posterior with every row equal to pi.
Posterior prior_posterior(std::size_t subjects, const Eigen::VectorXd& pi);

}  // namespace jointmix
