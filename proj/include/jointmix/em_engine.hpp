#pragma once

#include "jointmix/profile_model.hpp"
#include "jointmix/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jointmix {

enum class InformationMethod {
  reprofiled,     // re-profiled per-subject scores, pi as a nuisance (reprofiled_information)
  outer_product,  // n^-1 sum phi phi^T with gamma held fixed and pi treated as known
};

struct EMConfig {
  double tol_loglik = 1e-8;  // relative change of the observed log-likelihood
  double tol_param = 1e-6;   // sup-norm change of the free coordinates and pi
  double tol_score = 1e-7;   // sup-norm of the dataset-mean profile score
  int max_iter = 500;
  int n_restarts = 5;
  std::uint64_t seed = 1;
  int threads = 1;
  // Compare the analytic M-step gradient with central differences and switch
  // to differences when they disagree by more than 1e-4.
  bool self_check = false;
  InformationMethod information = InformationMethod::reprofiled;
};

void validate(const EMConfig& config);

struct FitResult {
  ModelParams params;
  HazardSteps hazard;
  Posterior posterior;
  std::vector<double> loglik_trace;
  std::vector<std::string> parameter_names;
  Eigen::VectorXd estimates;   // free coordinates in ParamLayout order
  Eigen::VectorXd std_errors;  // empty when the fit failed
  Eigen::MatrixXd info_matrix;
  double condition_number = 0.0;
  double score_norm = 0.0;  // sup-norm of the dataset-mean profile score
  bool converged = false;
  bool singular_information = false;
  int n_iter = 0;
  int restart = -1;  // restart that produced the reported fit
  int failed_restarts = 0;
  std::string diagnostic;
};

// gamma_ir proportional to pi_r P(Y_i | theta_r) P(T_i, d_i | hazard, theta_r).
Posterior e_step(const ProfileModel& model, const ModelParams& params,
                 const HazardSteps& hazard);

// Column means of the posterior.
Eigen::VectorXd m_step_pi(const Posterior& posterior);

struct MStepResult {
  ModelParams params;
  double objective_before = 0.0;  // Q / n at entry
  double objective_after = 0.0;
  double gradient_norm = 0.0;     // sup-norm of the mean profile score at exit
  bool converged = false;
  int iterations = 0;
  bool used_numeric_gradient = false;
  Eigen::MatrixXd inverse_hessian;
};

// Maximizes Q(Theta) with gamma fixed and the hazard re-profiled at every
// evaluation; pi is carried through unchanged.
MStepResult m_step_theta(const ProfileModel& model, const Posterior& posterior,
                         const ModelParams& current, const EMConfig& config,
                         const Eigen::MatrixXd* warm_inverse_hessian = nullptr);

// Per-subject log sum_r pi_r P(Y_i | theta_r) P(T_i, d_i | hazard, theta_r).
Eigen::VectorXd subject_loglik(const ProfileModel& model, const ModelParams& params,
                               const HazardSteps& hazard);
// Sum of subject_loglik.
double observed_loglik(const ProfileModel& model, const ModelParams& params,
                       const HazardSteps& hazard);

// Reorders groups so theta ascends and shifts theta so theta_1 = 0. The shift
// c is absorbed by a_l += phi_l c and the hazard jumps scale by e^{c delta0},
// leaving every likelihood unchanged. Returns the permutation applied
// (new group k is old group perm[k]).
std::vector<int> relabel_by_theta(ModelParams& params, HazardSteps& hazard,
                                  Posterior& posterior);

// Deterministic starting point: evenly spaced theta, uniform pi, zero
// intercepts and item effects, equally spaced scores.
ModelParams default_start(int groups, int levels, int items);
// Random start drawn from the restart distribution.
ModelParams random_start(int groups, int levels, int items, std::uint64_t seed);

FitResult em_fit(const Dataset& data, int groups, const EMConfig& config,
                 const std::optional<ModelParams>& init = std::nullopt);

}  // namespace jointmix
