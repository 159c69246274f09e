#include "jointmix/profile_model.hpp"

#include "jointmix/errors.hpp"
#include "jointmix/ordinal_model.hpp"

#include <algorithm>
#include <cmath>

namespace jointmix {

namespace {

Eigen::Map<Eigen::VectorXd> subject_row(RowMatrix& m, std::size_t i) {
  return {m.row(static_cast<Eigen::Index>(i)).data(), m.cols()};
}

}  // namespace

ProfileModel::ProfileModel(const Dataset& data, int groups)
    : data_(&data), layout_(groups, data.levels, data.items), index_(index_survival(data)) {
  validate(data);
  counts_.reserve(data.size());
  for (const auto& s : data.subjects) {
    counts_.push_back(response_counts(s.responses, data.items, data.levels));
  }
}

Eigen::MatrixXd ProfileModel::component_loglik(const ModelParams& params,
                                               const HazardSteps& hazard) const {
  const int groups = params.groups();
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd out(n, groups);

  std::vector<double> cumulative(hazard.jumps.size());
  double running = 0.0;
  for (std::size_t k = 0; k < hazard.jumps.size(); ++k) {
    running += hazard.jumps[k];
    cumulative[k] = running;
  }

  for (int r = 0; r < groups; ++r) {
    const Eigen::MatrixXd logp = category_log_probs(params.theta[r], params.ordinal);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& rec = data_->subjects[static_cast<std::size_t>(i)].survival;
      const auto pos = static_cast<std::size_t>(
          std::upper_bound(hazard.times.begin(), hazard.times.end(), rec.time) -
          hazard.times.begin());
      const double cum = pos == 0 ? 0.0 : cumulative[pos - 1];
      const double eta = linear_predictor(r, rec.covariate, params.theta, params.survival);
      double surv = -cum * std::exp(eta);
      if (rec.event == 1) {
        const double jump =
            (pos > 0 && hazard.times[pos - 1] == rec.time) ? hazard.jumps[pos - 1] : 0.0;
        if (!(jump > 0.0)) {
          throw InvalidHazard("subject " + data_->subjects[static_cast<std::size_t>(i)].id +
                              " fails at a time with no hazard jump");
        }
        surv += std::log(jump) + eta;
      }
      out(i, r) = counts_[static_cast<std::size_t>(i)].cwiseProduct(logp).sum() + surv;
    }
  }
  return out;
}

ProfileModel::Evaluation ProfileModel::evaluate(const ModelParams& params,
                                                const Posterior& posterior,
                                                bool per_subject) const {
  const int groups = params.groups();
  const auto n = size();
  const auto& gamma = posterior.gamma;
  Evaluation ev;
  ev.table = build_risk_table(*data_, index_, posterior, params.theta, params.survival);
  ev.gradient = Eigen::VectorXd::Zero(layout_.size());
  if (per_subject) ev.scores = RowMatrix::Zero(static_cast<Eigen::Index>(n), layout_.size());

  // Ordinal part is linear in the counts, so group-weighted totals suffice.
  for (int r = 0; r < groups; ++r) {
    Eigen::MatrixXd weighted = Eigen::MatrixXd::Zero(data_->items, data_->levels);
    for (std::size_t i = 0; i < n; ++i) {
      weighted += gamma(static_cast<Eigen::Index>(i), r) * counts_[i];
    }
    ev.value += ordinal_loglik(weighted, params.theta[r], params.ordinal);
    layout_.add_ordinal(r, ordinal_score(weighted, params.theta[r], params.ordinal), 1.0,
                        ev.gradient);
    if (per_subject) {
      for (std::size_t i = 0; i < n; ++i) {
        const double g = gamma(static_cast<Eigen::Index>(i), r);
        if (g == 0.0) continue;
        layout_.add_ordinal(r, ordinal_score(counts_[i], params.theta[r], params.ordinal), g,
                            subject_row(ev.scores, i));
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = data_->subjects[i].survival;
    const auto k = index_.slot[i];
    const double cum = ev.table.cumulative[k];
    const double log_jump = rec.event == 1 ? std::log(ev.table.hazard.jumps[k]) : 0.0;
    for (int r = 0; r < groups; ++r) {
      const double g = gamma(static_cast<Eigen::Index>(i), r);
      if (g == 0.0) continue;
      const double eta = linear_predictor(r, rec.covariate, params.theta, params.survival);
      ev.value += g * (rec.event * (log_jump + eta) - cum * std::exp(eta));
    }
    const Eigen::VectorXd surv =
        survival_profile_score(i, *data_, index_, gamma.row(static_cast<Eigen::Index>(i)).transpose(),
                               ev.table, params.theta, params.survival);
    layout_.add_survival(surv, ev.gradient);
    if (per_subject) layout_.add_survival(surv, subject_row(ev.scores, i));
  }

  const auto scale = 1.0 / static_cast<double>(n);
  ev.value *= scale;
  ev.gradient *= scale;
  return ev;
}

}  // namespace jointmix
