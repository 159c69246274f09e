#pragma once

// Cox proportional-hazards component with a discrete baseline hazard:
//
//   lambda(t | X, theta_r) = lambda_0(t) exp(theta_r delta0 + X delta1).
//
// Survival score vectors use the fixed layout
//   (theta_2..theta_R, delta0, delta1)
// with the delta0 slot omitted when R = 1 (theta_1 = 0 leaves delta0 without
// information). For group r the covariate vector v_r holds delta0 in the
// theta_r slot, theta_r in the delta0 slot and X in the delta1 slot.

#include "jointmix/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace jointmix {

int survival_score_size(int groups);

// v_r for one subject in the survival layout.
Eigen::VectorXd survival_design(int group, double covariate, const Eigen::VectorXd& theta,
                                const SurvivalParams& delta);

inline double linear_predictor(int group, double covariate, const Eigen::VectorXd& theta,
                               const SurvivalParams& delta) {
  return theta[group] * delta.delta0 + covariate * delta.delta1;
}

// Distinct observed times of a dataset, event counts, and each subject's slot.
struct SurvivalIndex {
  std::vector<double> times;
  std::vector<int> events;
  std::vector<std::size_t> slot;
};

SurvivalIndex index_survival(const Dataset& data);

// Risk-set aggregates at every distinct observed time for one parameter point.
// at_risk is the unnormalized sum S0(t) = sum_{T_i >= t} sum_r gamma_ir e^{eta_ir};
// moment is S1(t), the same sum weighted by v_r. M0 = S0 / n, M1 = S1 / n.
struct RiskTable {
  std::size_t subjects = 0;
  std::vector<double> times;
  std::vector<double> at_risk;
  Eigen::MatrixXd moment;       // K x q
  HazardSteps hazard;           // Breslow jumps
  std::vector<double> cumulative;
  Eigen::MatrixXd compensator;  // sum_{t_l <= t_k} jump_l S1_l / S0_l, K x q

  double m0(std::size_t k) const { return at_risk[k] / static_cast<double>(subjects); }
  Eigen::VectorXd m1(std::size_t k) const {
    return moment.row(static_cast<Eigen::Index>(k)).transpose() / static_cast<double>(subjects);
  }
};

RiskTable build_risk_table(const Dataset& data, const SurvivalIndex& index,
                           const Posterior& posterior, const Eigen::VectorXd& theta,
                           const SurvivalParams& delta);

struct RiskAggregates {
  double m0 = 0.0;
  Eigen::VectorXd m1;
};

// Direct evaluation at an arbitrary t >= 0. Throws EmptyRiskSet when nobody is at risk.
RiskAggregates risk_aggregates(double t, const Dataset& data, const Posterior& posterior,
                               const Eigen::VectorXd& theta, const SurvivalParams& delta);

// Breslow-type profiled hazard: jump D_l / S0(t_l) at each event time,
// zero at censored-only times.
HazardSteps profile_hazard(const Dataset& data, const Posterior& posterior,
                           const Eigen::VectorXd& theta, const SurvivalParams& delta);

// Right-continuous Lambda(t) = sum of jumps at times <= t.
double cum_hazard(const HazardSteps& hazard, double t);
// Jump at exactly t, or 0 when t is not a step time.
double hazard_jump(const HazardSteps& hazard, double t);

double survival_loglik(const SurvivalRecord& record, int group, const HazardSteps& hazard,
                       const Eigen::VectorXd& theta, const SurvivalParams& delta);

// Profile score of subject i with gamma held fixed, evaluated through the
// derivatives of log lambda-hat and Lambda-hat.
Eigen::VectorXd survival_profile_score(std::size_t subject, const Dataset& data,
                                       const SurvivalIndex& index,
                                       const Eigen::Ref<const Eigen::VectorXd>& gamma_row,
                                       const RiskTable& table, const Eigen::VectorXd& theta,
                                       const SurvivalParams& delta);

// Efficient score ldot - B(M1/M0) for an arbitrary cumulative hazard, with
// M0/M1 taken from the table.
Eigen::VectorXd efficient_score_survival(const SurvivalRecord& record,
                                         const Eigen::Ref<const Eigen::VectorXd>& gamma_row,
                                         const HazardSteps& hazard,
                                         const Eigen::VectorXd& theta,
                                         const SurvivalParams& delta, const RiskTable& table);

}  // namespace jointmix
