#include "jointmix/inference.hpp"

#include "jointmix/em_engine.hpp"
#include "jointmix/errors.hpp"
#include "jointmix/survival_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace jointmix {

namespace {

constexpr double kMaxCondition = 1e10;

}  // namespace

RowMatrix profile_scores(const ProfileModel& model, const ModelParams& params,
                         const Posterior& posterior) {
  return model.evaluate(params, posterior, true).scores;
}

Eigen::VectorXd profile_score_obs(const ProfileModel& model, const ModelParams& params,
                                  const Posterior& posterior, std::size_t subject) {
  if (subject >= model.size()) throw InputError("subject index out of range");
  return profile_scores(model, params, posterior).row(static_cast<Eigen::Index>(subject)).transpose();
}

InfoMatrix information_from_scores(const RowMatrix& scores) {
  InfoMatrix info;
  const auto n = static_cast<double>(scores.rows());
  info.matrix = (scores.transpose() * scores) / n;
  info.matrix = 0.5 * (info.matrix + info.matrix.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info.matrix, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  info.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  return info;
}

InfoMatrix information_matrix(const ProfileModel& model, const ModelParams& params,
                              const Posterior& posterior) {
  return information_from_scores(profile_scores(model, params, posterior));
}

RowMatrix mixture_weight_scores(const Posterior& posterior, const Eigen::VectorXd& pi) {
  const auto groups = pi.size();
  RowMatrix out(posterior.subjects(), std::max<Eigen::Index>(groups - 1, 0));
  for (Eigen::Index r = 1; r < groups; ++r) {
    out.col(r - 1) = posterior.gamma.col(r) / pi[r] - posterior.gamma.col(0) / pi[0];
  }
  return out;
}

RowMatrix reprofiled_scores(const ProfileModel& model, const ModelParams& params,
                            const Posterior* start, double h) {
  const auto& layout = model.layout();
  const Eigen::VectorXd x0 = layout.pack(params);
  const int groups = params.groups();
  const auto p = x0.size();
  const auto n = static_cast<Eigen::Index>(model.size());
  const NuisanceProfile base = profile_nuisance(model, params, 2000, 1e-13, start);

  auto contributions = [&](const ModelParams& at) {
    const NuisanceProfile nuisance = profile_nuisance(model, at, 2000, 1e-13, &base.posterior);
    return subject_loglik(model, at, nuisance.hazard);
  };

  RowMatrix out(n, p + groups - 1);
  Eigen::VectorXd probe = x0;
  for (Eigen::Index k = 0; k < p; ++k) {
    const double step = h * std::max(1.0, std::abs(x0[k]));
    probe[k] = x0[k] + step;
    const Eigen::VectorXd up = contributions(layout.unpack(probe, params));
    probe[k] = x0[k] - step;
    const Eigen::VectorXd down = contributions(layout.unpack(probe, params));
    probe[k] = x0[k];
    out.col(k) = (up - down) / (2.0 * step);
  }
  for (int r = 1; r < groups; ++r) {
    const double step = h * std::min({1.0, params.pi[r], params.pi[0]});
    ModelParams at = params;
    at.pi[r] += step;
    at.pi[0] -= step;
    const Eigen::VectorXd up = contributions(at);
    at.pi[r] -= 2.0 * step;
    at.pi[0] += 2.0 * step;
    const Eigen::VectorXd down = contributions(at);
    out.col(p + r - 1) = (up - down) / (2.0 * step);
  }
  if (!out.allFinite()) throw NumericError("non-finite re-profiled score");
  return out;
}

InfoMatrix reprofiled_information(const ProfileModel& model, const ModelParams& params,
                                  const Posterior* start) {
  const RowMatrix scores = reprofiled_scores(model, params, start);
  const auto p = model.layout().size();
  const auto n = static_cast<double>(scores.rows());
  if (scores.cols() == p) return information_from_scores(scores);
  const auto w = scores.cols() - p;
  const Eigen::MatrixXd full = scores.transpose() * scores / n;
  const Eigen::MatrixXd tt = full.topLeftCorner(p, p);
  const Eigen::MatrixXd tp = full.topRightCorner(p, w);
  const Eigen::MatrixXd pp = full.bottomRightCorner(w, w);
  Eigen::LDLT<Eigen::MatrixXd> solve(pp);
  if (solve.info() != Eigen::Success || !(solve.vectorD().array() > 0.0).all()) {
    throw SingularInformation("mixture-weight information is singular",
                              Eigen::VectorXd::Zero(p));
  }
  InfoMatrix info;
  info.matrix = tt - tp * solve.solve(tp.transpose());
  info.matrix = 0.5 * (info.matrix + info.matrix.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info.matrix, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  info.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  return info;
}

Eigen::VectorXd standard_errors(const InfoMatrix& info, std::size_t n) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info.matrix);
  const auto& values = eig.eigenvalues();
  const double lo = values[0];
  const double hi = values[values.size() - 1];
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    throw SingularInformation("information matrix is singular (smallest eigenvalue " +
                                  std::to_string(lo) + ")",
                              eig.eigenvectors().col(0));
  }
  const Eigen::MatrixXd inv =
      eig.eigenvectors() * values.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  return (inv.diagonal() / static_cast<double>(n)).cwiseSqrt();
}

Eigen::VectorXd pseudo_standard_errors(const InfoMatrix& info, std::size_t n) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info.matrix);
  const auto& values = eig.eigenvalues();
  const double cutoff = std::max(values.cwiseAbs().maxCoeff(), 0.0) / kMaxCondition;
  Eigen::VectorXd inv_values(values.size());
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    inv_values[k] = values[k] > cutoff ? 1.0 / values[k] : 0.0;
  }
  const Eigen::MatrixXd inv =
      eig.eigenvectors() * inv_values.asDiagonal() * eig.eigenvectors().transpose();
  return (inv.diagonal().cwiseMax(0.0) / static_cast<double>(n)).cwiseSqrt();
}

NuisanceProfile profile_nuisance(const ProfileModel& model, const ModelParams& params,
                                 int max_iter, double tol, const Posterior* start) {
  NuisanceProfile out;
  out.posterior = start != nullptr ? *start : prior_posterior(model.size(), params.pi);
  for (out.iterations = 1; out.iterations <= max_iter; ++out.iterations) {
    const HazardSteps hazard =
        build_risk_table(model.data(), model.index(), out.posterior, params.theta,
                         params.survival)
            .hazard;
    Posterior next = e_step(model, params, hazard);
    const double change = (next.gamma - out.posterior.gamma).cwiseAbs().maxCoeff();
    out.posterior = std::move(next);
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  out.iterations = std::min(out.iterations, max_iter);
  out.hazard = build_risk_table(model.data(), model.index(), out.posterior, params.theta,
                                params.survival)
                   .hazard;
  return out;
}

IdentityReport info_identity_check(const ProfileModel& model, const ModelParams& params,
                                   double h) {
  if (!(h >= 1e-5 && h <= 1e-2)) throw InputError("finite-difference step must lie in [1e-5, 1e-2]");
  const auto& layout = model.layout();
  const Eigen::VectorXd x0 = layout.pack(params);
  const auto p = x0.size();

  auto mean_score = [&](const Eigen::VectorXd& x) {
    const ModelParams at = layout.unpack(x, params);
    const NuisanceProfile nuisance = profile_nuisance(model, at);
    return model.evaluate(at, nuisance.posterior, false).gradient;
  };

  IdentityReport report;
  const NuisanceProfile base = profile_nuisance(model, params);
  report.outer_product = information_matrix(model, params, base.posterior).matrix;
  report.fd_jacobian.resize(p, p);
  Eigen::VectorXd probe = x0;
  const auto names = layout.names();
  for (Eigen::Index k = 0; k < p; ++k) {
    const double step = h * std::max(1.0, std::abs(x0[k]));
    probe[k] = x0[k] + step;
    const Eigen::VectorXd up = mean_score(probe);
    probe[k] = x0[k] - step;
    const Eigen::VectorXd down = mean_score(probe);
    probe[k] = x0[k];
    report.fd_jacobian.col(k) = -(up - down) / (2.0 * step);
    if (!report.fd_jacobian.col(k).allFinite()) {
      throw NumericError("non-finite finite-difference column for " +
                         names[static_cast<std::size_t>(k)]);
    }
  }
  report.relative_frobenius_gap =
      (report.fd_jacobian - report.outer_product).norm() / report.outer_product.norm();
  return report;
}

double StepDirection::operator()(double t) const {
  const auto k = static_cast<std::size_t>(std::lower_bound(knots.begin(), knots.end(), t) -
                                          knots.begin());
  return values[k];
}

StepDirection constant_direction(double value) {
  return {"constant", {}, {value}};
}

StepDirection indicator_direction(double cutoff, std::string name) {
  return {std::move(name), {cutoff}, {1.0, 0.0}};
}

std::vector<StepDirection> default_directions(const Dataset& data) {
  std::vector<double> events;
  for (const auto& s : data.subjects) {
    if (s.survival.event == 1) events.push_back(s.survival.time);
  }
  std::vector<StepDirection> out{constant_direction(1.0)};
  if (events.empty()) return out;
  std::sort(events.begin(), events.end());
  for (int pct : {10, 30, 50, 70, 90}) {
    const auto rank = static_cast<std::size_t>(
        std::ceil(pct / 100.0 * static_cast<double>(events.size())));
    const double q = events[std::clamp<std::size_t>(rank, 1, events.size()) - 1];
    out.push_back(indicator_direction(q, "indicator_q" + std::to_string(pct)));
  }
  return out;
}

std::vector<DirectionStatistic> orthogonality_check(const ProfileModel& model,
                                                    const ModelParams& params,
                                                    const std::vector<StepDirection>& directions) {
  const NuisanceProfile nuisance = profile_nuisance(model, params);
  const RowMatrix scores = profile_scores(model, params, nuisance.posterior);
  const auto& data = model.data();
  const auto& hazard = nuisance.hazard;
  const auto n = static_cast<Eigen::Index>(model.size());
  const int groups = params.groups();

  std::vector<DirectionStatistic> out;
  for (const auto& h : directions) {
    if (h.values.size() != h.knots.size() + 1) {
      throw InputError("direction " + h.name + " needs one more value than knots");
    }
    // int_0^t h dLambda at every step time
    std::vector<double> integral(hazard.times.size());
    double running = 0.0;
    for (std::size_t l = 0; l < hazard.times.size(); ++l) {
      running += h(hazard.times[l]) * hazard.jumps[l];
      integral[l] = running;
    }
    Eigen::MatrixXd products(n, scores.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& rec = data.subjects[static_cast<std::size_t>(i)].survival;
      const auto pos = static_cast<std::size_t>(
          std::upper_bound(hazard.times.begin(), hazard.times.end(), rec.time) -
          hazard.times.begin());
      const double int_h = pos == 0 ? 0.0 : integral[pos - 1];
      double bh = 0.0;
      for (int r = 0; r < groups; ++r) {
        const double e = std::exp(linear_predictor(r, rec.covariate, params.theta, params.survival));
        bh += nuisance.posterior.gamma(i, r) * (rec.event * h(rec.time) - e * int_h);
      }
      products.row(i) = scores.row(i) * bh;
    }
    DirectionStatistic stat;
    stat.name = h.name;
    stat.mean = products.colwise().mean().transpose();
    const Eigen::MatrixXd centered = products.rowwise() - stat.mean.transpose();
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    stat.std_error = (centered.colwise().squaredNorm().transpose() / denom /
                      static_cast<double>(n))
                         .cwiseSqrt();
    for (Eigen::Index k = 0; k < stat.mean.size(); ++k) {
      if (stat.std_error[k] > 0.0) {
        stat.max_abs_z = std::max(stat.max_abs_z, std::abs(stat.mean[k]) / stat.std_error[k]);
      } else if (stat.mean[k] != 0.0) {
        stat.max_abs_z = std::numeric_limits<double>::infinity();
      }
    }
    out.push_back(std::move(stat));
  }
  return out;
}

EquivalenceReport efficient_score_equivalence(const ProfileModel& model,
                                              const ModelParams& params,
                                              const Posterior& posterior,
                                              const HazardSteps* hazard) {
  const auto& data = model.data();
  const RiskTable table =
      build_risk_table(data, model.index(), posterior, params.theta, params.survival);
  const HazardSteps& lambda = hazard != nullptr ? *hazard : table.hazard;
  EquivalenceReport report;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Eigen::VectorXd row = posterior.gamma.row(static_cast<Eigen::Index>(i)).transpose();
    const Eigen::VectorXd profile =
        survival_profile_score(i, data, model.index(), row, table, params.theta, params.survival);
    const Eigen::VectorXd efficient = efficient_score_survival(
        data.subjects[i].survival, row, lambda, params.theta, params.survival, table);
    const double gap = (profile - efficient).lpNorm<Eigen::Infinity>() /
                       std::max(1.0, profile.lpNorm<Eigen::Infinity>());
    if (gap > report.max_gap || i == 0) {
      report.max_gap = gap;
      report.worst_subject = i;
    }
  }
  return report;
}

ContractionReport contraction_check(const ProfileModel& model, const ModelParams& params,
                                    const HazardSteps& hazard) {
  double mass = 0.0;
  for (double jump : hazard.jumps) mass += jump;
  if (!(mass > 0.0)) throw InvalidHazard("hazard has no mass; contraction bound undefined");

  const Posterior weights = e_step(model, params, hazard);
  const auto& data = model.data();
  const int groups = params.groups();
  ContractionReport report;
  report.bound = 1.0 / mass;
  Eigen::VectorXd e(groups);
  for (std::size_t i = 0; i < model.size(); ++i) {
    const double x = data.subjects[i].survival.covariate;
    for (int r = 0; r < groups; ++r) {
      e[r] = std::exp(linear_predictor(r, x, params.theta, params.survival));
    }
    // -e_r + sum_g w_g e_g written as sum_g w_g (e_g - e_r), since the weights sum to 1
    for (int r = 0; r < groups; ++r) {
      double lhs = 0.0;
      for (int g = 0; g < groups; ++g) {
        lhs += weights.gamma(static_cast<Eigen::Index>(i), g) * (e[g] - e[r]);
      }
      report.max_lhs = std::max(report.max_lhs, std::abs(lhs));
    }
  }
  report.satisfied = report.max_lhs < report.bound;
  return report;
}

}  // namespace jointmix
