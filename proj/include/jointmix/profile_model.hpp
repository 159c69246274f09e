#pragma once

// Preprocessed dataset plus the profile log-likelihood
//
//   Q(Theta) = sum_i sum_r gamma_ir { log P(Y_i | theta_r, alpha)
//                                    + log P(T_i, d_i | Lambda-hat(Theta), theta_r, delta) }
//
// with gamma held fixed and Lambda-hat re-profiled at every evaluation.
// The per-subject gradient of the summand is the profile score phi_i.

#include "jointmix/param_layout.hpp"
#include "jointmix/survival_model.hpp"
#include "jointmix/types.hpp"

#include <Eigen/Core>

#include <vector>

namespace jointmix {

class ProfileModel {
 public:
  // Keeps a reference to data; the dataset must outlive the model.
  ProfileModel(const Dataset& data, int groups);

  const Dataset& data() const { return *data_; }
  const ParamLayout& layout() const { return layout_; }
  const SurvivalIndex& index() const { return index_; }
  int groups() const { return layout_.groups(); }
  std::size_t size() const { return data_->size(); }
  const Eigen::MatrixXd& counts(std::size_t subject) const { return counts_[subject]; }

  // n x R table of log P(Y_i | theta_r) + log P(T_i, d_i | hazard, theta_r).
  Eigen::MatrixXd component_loglik(const ModelParams& params, const HazardSteps& hazard) const;

  struct Evaluation {
    double value = 0.0;        // Q / n
    Eigen::VectorXd gradient;  // dataset-mean profile score
    RowMatrix scores;          // n x p, filled when requested
    RiskTable table;
  };

  Evaluation evaluate(const ModelParams& params, const Posterior& posterior,
                      bool per_subject) const;

 private:
  const Dataset* data_;
  ParamLayout layout_;
  SurvivalIndex index_;
  std::vector<Eigen::MatrixXd> counts_;
};

}  // namespace jointmix
