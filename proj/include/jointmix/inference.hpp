#pragma once

// Profile scores, the empirical efficient information, standard errors and
// numerical checks of the asymptotic theory behind them.

#include "jointmix/profile_model.hpp"
#include "jointmix/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <vector>

namespace jointmix {

struct InfoMatrix {
  Eigen::MatrixXd matrix;
  double condition_number = 0.0;  // infinity when singular
};

// n x p per-subject profile scores phi_i = phi_O + phi_S (gamma fixed).
RowMatrix profile_scores(const ProfileModel& model, const ModelParams& params,
                         const Posterior& posterior);
Eigen::VectorXd profile_score_obs(const ProfileModel& model, const ModelParams& params,
                                  const Posterior& posterior, std::size_t subject);

// n^-1 sum_i phi_i phi_i^T.
InfoMatrix information_from_scores(const RowMatrix& scores);
InfoMatrix information_matrix(const ProfileModel& model, const ModelParams& params,
                              const Posterior& posterior);

// Per-subject scores of the free mixture weights (pi_2..pi_R, pi_1 = 1 - sum)
// with gamma held fixed: gamma_ir / pi_r - gamma_i1 / pi_1. n x (R-1).
RowMatrix mixture_weight_scores(const Posterior& posterior, const Eigen::VectorXd& pi);

// Per-subject derivatives of log sum_r pi_r P(Y_i | theta_r) P(T_i, d_i | Lambda, theta_r)
// with (gamma, Lambda) re-profiled jointly at every perturbed point, by central
// differences with step h * max(1, |x_k|). Columns are the free coordinates
// of Theta followed by pi_2..pi_R. start seeds the nuisance iteration.
RowMatrix reprofiled_scores(const ProfileModel& model, const ModelParams& params,
                            const Posterior* start = nullptr, double h = 1e-4);

// Information for Theta from the re-profiled scores with pi as a nuisance:
// the Schur complement I_TT - I_Tp I_pp^-1 I_pT of their outer product.
InfoMatrix reprofiled_information(const ProfileModel& model, const ModelParams& params,
                                  const Posterior* start = nullptr);

// sqrt(diag(I^-1) / n). Throws SingularInformation (carrying the eigenvector
// of the smallest eigenvalue) when the condition number exceeds 1e10.
Eigen::VectorXd standard_errors(const InfoMatrix& info, std::size_t n);
// Same from the Moore-Penrose pseudo-inverse; never throws.
Eigen::VectorXd pseudo_standard_errors(const InfoMatrix& info, std::size_t n);

// Posterior and hazard solved jointly at fixed (Theta, pi): the fixed point
// gamma = E-step(Lambda-hat(gamma)), Lambda-hat = profile_hazard(gamma).
struct NuisanceProfile {
  Posterior posterior;
  HazardSteps hazard;
  int iterations = 0;
  bool converged = false;
};
NuisanceProfile profile_nuisance(const ProfileModel& model, const ModelParams& params,
                                 int max_iter = 2000, double tol = 1e-13,
                                 const Posterior* start = nullptr);

struct IdentityReport {
  Eigen::MatrixXd fd_jacobian;    // -d/dTheta^T of the mean score
  Eigen::MatrixXd outer_product;  // n^-1 sum phi phi^T
  double relative_frobenius_gap = 0.0;
};
// Central differences with step h * max(1, |x_k|); the nuisance is
// re-profiled at every perturbed point.
IdentityReport info_identity_check(const ProfileModel& model, const ModelParams& params,
                                   double h = 1e-3);

// Piecewise-constant direction on [0, tau]: values[k] on (knots[k-1], knots[k]],
// with the first interval closed at 0 and the last open to the right.
struct StepDirection {
  std::string name;
  std::vector<double> knots;
  std::vector<double> values;

  double operator()(double t) const;
};

StepDirection constant_direction(double value);
StepDirection indicator_direction(double cutoff, std::string name);
// Constant 1 plus indicators 1[0, q] at the 10/30/50/70/90% event-time quantiles.
std::vector<StepDirection> default_directions(const Dataset& data);

struct DirectionStatistic {
  std::string name;
  Eigen::VectorXd mean;       // per score coordinate, mean of phi_i (Bh)_i
  Eigen::VectorXd std_error;  // Monte Carlo standard error of the mean
  double max_abs_z = 0.0;
};

// Covariance of the profile score with the hazard score operator
//   (Bh)_i = sum_r gamma_ir (d_i h(T_i) - e^{eta_ir} int_0^{T_i} h dLambda),
// evaluated at the self-consistent nuisance for params.
std::vector<DirectionStatistic> orthogonality_check(const ProfileModel& model,
                                                    const ModelParams& params,
                                                    const std::vector<StepDirection>& directions);

struct EquivalenceReport {
  double max_gap = 0.0;  // max_i |profile - efficient|_inf / max(1, |profile|_inf)
  std::size_t worst_subject = 0;
};
// Compares survival_profile_score with efficient_score_survival. The hazard
// defaults to Lambda-hat at (posterior, params); pass another to perturb it.
EquivalenceReport efficient_score_equivalence(const ProfileModel& model,
                                              const ModelParams& params,
                                              const Posterior& posterior,
                                              const HazardSteps* hazard = nullptr);

struct ContractionReport {
  double max_lhs = 0.0;
  double bound = 0.0;  // 1 / Lambda(t_max)
  bool satisfied = false;
};
ContractionReport contraction_check(const ProfileModel& model, const ModelParams& params,
                                    const HazardSteps& hazard);

}  // namespace jointmix
