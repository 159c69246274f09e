#include "jointmix/survival_model.hpp"

#include "jointmix/errors.hpp"

#include <algorithm>
#include <cmath>

namespace jointmix {

namespace {

std::size_t find_time(const std::vector<double>& times, double t) {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end() || *it != t) return times.size();
  return static_cast<std::size_t>(it - times.begin());
}

// out += w * v_r without materializing v_r.
template <typename Out>
void add_design(int group, double covariate, const Eigen::VectorXd& theta,
                const SurvivalParams& delta, double w, Out&& out) {
  const auto groups = static_cast<int>(theta.size());
  if (group > 0) out[group - 1] += w * delta.delta0;
  if (groups >= 2) out[groups - 1] += w * theta[group];
  out[out.size() - 1] += w * covariate;
}

}  // namespace

int survival_score_size(int groups) { return (groups - 1) + (groups >= 2 ? 1 : 0) + 1; }

Eigen::VectorXd survival_design(int group, double covariate, const Eigen::VectorXd& theta,
                                const SurvivalParams& delta) {
  const auto groups = static_cast<int>(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(survival_score_size(groups));
  if (group > 0) v[group - 1] = delta.delta0;
  if (groups >= 2) v[groups - 1] = theta[group];
  v[v.size() - 1] = covariate;
  return v;
}

SurvivalIndex index_survival(const Dataset& data) {
  SurvivalIndex index;
  index.times.reserve(data.size());
  for (const auto& s : data.subjects) index.times.push_back(s.survival.time);
  std::sort(index.times.begin(), index.times.end());
  index.times.erase(std::unique(index.times.begin(), index.times.end()), index.times.end());
  index.events.assign(index.times.size(), 0);
  index.slot.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto k = find_time(index.times, data.subjects[i].survival.time);
    index.slot[i] = k;
    index.events[k] += data.subjects[i].survival.event;
  }
  return index;
}

RiskTable build_risk_table(const Dataset& data, const SurvivalIndex& index,
                           const Posterior& posterior, const Eigen::VectorXd& theta,
                           const SurvivalParams& delta) {
  const auto groups = static_cast<int>(theta.size());
  const int q = survival_score_size(groups);
  const std::size_t slots = index.times.size();
  if (posterior.subjects() != static_cast<Eigen::Index>(data.size()) ||
      posterior.groups() != groups) {
    throw InputError("posterior shape does not match data and groups");
  }

  RiskTable table;
  table.subjects = data.size();
  table.times = index.times;
  table.at_risk.assign(slots, 0.0);
  table.moment = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(slots), q);

  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& rec = data.subjects[i].survival;
    const auto k = static_cast<Eigen::Index>(index.slot[i]);
    for (int r = 0; r < groups; ++r) {
      const double w = posterior.gamma(static_cast<Eigen::Index>(i), r) *
                       std::exp(linear_predictor(r, rec.covariate, theta, delta));
      table.at_risk[index.slot[i]] += w;
      add_design(r, rec.covariate, theta, delta, w, table.moment.row(k));
    }
  }
  for (std::size_t k = slots; k-- > 1;) {
    table.at_risk[k - 1] += table.at_risk[k];
    table.moment.row(static_cast<Eigen::Index>(k - 1)) +=
        table.moment.row(static_cast<Eigen::Index>(k));
  }

  table.hazard.times = index.times;
  table.hazard.jumps.assign(slots, 0.0);
  table.cumulative.assign(slots, 0.0);
  table.compensator = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(slots), q);
  double running = 0.0;
  Eigen::RowVectorXd comp = Eigen::RowVectorXd::Zero(q);
  for (std::size_t k = 0; k < slots; ++k) {
    if (index.events[k] > 0) {
      const double s0 = table.at_risk[k];
      if (!(s0 > 0.0) || !std::isfinite(s0)) throw EmptyRiskSet(index.times[k]);
      const double jump = static_cast<double>(index.events[k]) / s0;
      table.hazard.jumps[k] = jump;
      running += jump;
      comp += (jump / s0) * table.moment.row(static_cast<Eigen::Index>(k));
    }
    table.cumulative[k] = running;
    table.compensator.row(static_cast<Eigen::Index>(k)) = comp;
  }
  return table;
}

RiskAggregates risk_aggregates(double t, const Dataset& data, const Posterior& posterior,
                               const Eigen::VectorXd& theta, const SurvivalParams& delta) {
  const auto groups = static_cast<int>(theta.size());
  RiskAggregates out;
  out.m1 = Eigen::VectorXd::Zero(survival_score_size(groups));
  std::size_t at_risk = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& rec = data.subjects[i].survival;
    if (rec.time < t) continue;
    ++at_risk;
    for (int r = 0; r < groups; ++r) {
      const double w = posterior.gamma(static_cast<Eigen::Index>(i), r) *
                       std::exp(linear_predictor(r, rec.covariate, theta, delta));
      out.m0 += w;
      out.m1 += w * survival_design(r, rec.covariate, theta, delta);
    }
  }
  if (at_risk == 0) throw EmptyRiskSet(t);
  const auto n = static_cast<double>(data.size());
  out.m0 /= n;
  out.m1 /= n;
  return out;
}

HazardSteps profile_hazard(const Dataset& data, const Posterior& posterior,
                           const Eigen::VectorXd& theta, const SurvivalParams& delta) {
  return build_risk_table(data, index_survival(data), posterior, theta, delta).hazard;
}

double cum_hazard(const HazardSteps& hazard, double t) {
  double total = 0.0;
  for (std::size_t k = 0; k < hazard.times.size() && hazard.times[k] <= t; ++k) {
    total += hazard.jumps[k];
  }
  return total;
}

double hazard_jump(const HazardSteps& hazard, double t) {
  const auto k = find_time(hazard.times, t);
  return k == hazard.times.size() ? 0.0 : hazard.jumps[k];
}

double survival_loglik(const SurvivalRecord& record, int group, const HazardSteps& hazard,
                       const Eigen::VectorXd& theta, const SurvivalParams& delta) {
  const double eta = linear_predictor(group, record.covariate, theta, delta);
  double value = -cum_hazard(hazard, record.time) * std::exp(eta);
  if (record.event == 1) {
    const double jump = hazard_jump(hazard, record.time);
    if (!(jump > 0.0)) {
      throw InvalidHazard("event at t = " + std::to_string(record.time) +
                          " has no positive hazard jump");
    }
    value += std::log(jump) + eta;
  }
  return value;
}

Eigen::VectorXd survival_profile_score(std::size_t subject, const Dataset& data,
                                       const SurvivalIndex& index,
                                       const Eigen::Ref<const Eigen::VectorXd>& gamma_row,
                                       const RiskTable& table, const Eigen::VectorXd& theta,
                                       const SurvivalParams& delta) {
  const auto& rec = data.subjects[subject].survival;
  const auto k = static_cast<Eigen::Index>(index.slot[subject]);
  const auto groups = static_cast<int>(theta.size());
  Eigen::VectorXd score = Eigen::VectorXd::Zero(survival_score_size(groups));
  const double s0 = table.at_risk[index.slot[subject]];
  const double cum = table.cumulative[index.slot[subject]];
  // d log lambda-hat(T) / d Theta = -S1/S0 ; d Lambda-hat(T) / d Theta = -compensator
  double event_weight = 0.0;
  double comp_weight = 0.0;
  for (int r = 0; r < groups; ++r) {
    const double g = gamma_row[r];
    if (g == 0.0) continue;
    const double e = std::exp(linear_predictor(r, rec.covariate, theta, delta));
    add_design(r, rec.covariate, theta, delta, g * (rec.event - e * cum), score);
    event_weight += g * rec.event;
    comp_weight += g * e;
  }
  if (event_weight != 0.0) score -= (event_weight / s0) * table.moment.row(k).transpose();
  score += comp_weight * table.compensator.row(k).transpose();
  return score;
}

Eigen::VectorXd efficient_score_survival(const SurvivalRecord& record,
                                         const Eigen::Ref<const Eigen::VectorXd>& gamma_row,
                                         const HazardSteps& hazard,
                                         const Eigen::VectorXd& theta,
                                         const SurvivalParams& delta, const RiskTable& table) {
  const auto groups = static_cast<int>(theta.size());
  const int q = survival_score_size(groups);
  auto ratio = [&](double t) -> Eigen::VectorXd {
    const auto k = find_time(table.times, t);
    if (k == table.times.size()) {
      throw InputError("no risk aggregates at t = " + std::to_string(t));
    }
    const double m0 = table.m0(k);
    if (!(m0 > 0.0)) throw EmptyRiskSet(t);
    return table.m1(k) / m0;
  };

  // integral_0^T (M1/M0) dLambda as a finite sum over jumps
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(q);
  double cum = 0.0;
  for (std::size_t l = 0; l < hazard.times.size() && hazard.times[l] <= record.time; ++l) {
    if (hazard.jumps[l] == 0.0) continue;
    cum += hazard.jumps[l];
    integral += hazard.jumps[l] * ratio(hazard.times[l]);
  }
  const Eigen::VectorXd at_t = record.event == 1 ? ratio(record.time) : Eigen::VectorXd::Zero(q);

  Eigen::VectorXd ldot = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd projection = Eigen::VectorXd::Zero(q);
  for (int r = 0; r < groups; ++r) {
    const double g = gamma_row[r];
    if (g == 0.0) continue;
    const Eigen::VectorXd v = survival_design(r, record.covariate, theta, delta);
    const double e = std::exp(linear_predictor(r, record.covariate, theta, delta));
    ldot += g * v * (record.event - cum * e);
    projection += g * (record.event * at_t - e * integral);
  }
  return ldot - projection;
}

}  // namespace jointmix
