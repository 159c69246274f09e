#pragma once

// Ordered stereotype model for the longitudinal ordinal responses:
//
//   log P(Y = l | theta_r) / P(Y = 1 | theta_r) = a_l + phi_l (b_j + theta_r)
//
// Score vectors are laid out over the free coordinates
//   (a_2..a_L, b_2..b_J, u_2..u_{L-1}, theta_r)
// where u parameterizes the monotone scores (see phi_from_free).

#include "jointmix/types.hpp"

#include <Eigen/Core>

namespace jointmix {

void validate(const OrdinalParams& params, int levels, int items);

// Number of free ordinal coordinates plus one slot for the group effect.
int ordinal_score_size(int levels, int items);

// u (length L-2) -> phi (length L) with
//   phi_l = sum_{k=2}^{l} e^{u_k} / sum_{k=2}^{L} e^{u_k},  u_L = 0.
Eigen::VectorXd phi_from_free(const Eigen::VectorXd& u);
// Inverse of phi_from_free; requires strictly increasing phi.
Eigen::VectorXd free_from_phi(const Eigen::VectorXd& phi);

Eigen::VectorXd category_probs(int item, double group_effect, const OrdinalParams& params);
// J x L matrix of log category probabilities for one group effect.
Eigen::MatrixXd category_log_probs(double group_effect, const OrdinalParams& params);

// J x L table of response counts (the responses summed over time points).
Eigen::MatrixXd response_counts(const ResponseSet& responses, int items, int levels);

double ordinal_loglik(const ResponseSet& responses, double group_effect,
                      const OrdinalParams& params);
// Same likelihood from a (possibly fractional) J x L count table.
double ordinal_loglik(const Eigen::MatrixXd& counts, double group_effect,
                      const OrdinalParams& params);

Eigen::VectorXd ordinal_score(const ResponseSet& responses, double group_effect,
                              const OrdinalParams& params);
Eigen::VectorXd ordinal_score(const Eigen::MatrixXd& counts, double group_effect,
                              const OrdinalParams& params);

}  // namespace jointmix
