#include "jointmix/em_engine.hpp"

#include "jointmix/errors.hpp"
#include "jointmix/inference.hpp"
#include "jointmix/optimizer.hpp"
#include "jointmix/ordinal_model.hpp"
#include "jointmix/survival_model.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace jointmix {

namespace {

constexpr double kMinWeight = 1e-6;
constexpr double kMinColumnMass = 1.0;
constexpr double kSelfCheckTol = 1e-4;

HazardSteps profiled(const ProfileModel& model, const ModelParams& params,
                     const Posterior& posterior) {
  return build_risk_table(model.data(), model.index(), posterior, params.theta, params.survival)
      .hazard;
}

// Row-wise log-sum-exp of component log densities shifted by log pi.
Eigen::VectorXd log_mixture(const ProfileModel& model, const ModelParams& params,
                            const HazardSteps& hazard, Eigen::MatrixXd& joint) {
  joint = model.component_loglik(params, hazard);
  joint.rowwise() += params.pi.array().log().matrix().transpose();
  Eigen::VectorXd out(joint.rows());
  for (Eigen::Index i = 0; i < joint.rows(); ++i) {
    const double top = joint.row(i).maxCoeff();
    if (!std::isfinite(top)) {
      throw NumericError("subject " + model.data().subjects[static_cast<std::size_t>(i)].id +
                         " has zero density under every group");
    }
    out[i] = top + std::log((joint.row(i).array() - top).exp().sum());
  }
  return out;
}

// E-step and observed log-likelihood from one pass over the component densities.
Posterior e_step_with_loglik(const ProfileModel& model, const ModelParams& params,
                             const HazardSteps& hazard, double& loglik) {
  Eigen::MatrixXd joint;
  const Eigen::VectorXd norm = log_mixture(model, params, hazard, joint);
  loglik = norm.sum();
  if (!std::isfinite(loglik)) throw NumericError("observed log-likelihood is not finite");
  Posterior post;
  post.gamma = (joint.colwise() - norm).array().exp().matrix();
  for (Eigen::Index i = 0; i < post.gamma.rows(); ++i) {
    post.gamma.row(i) /= post.gamma.row(i).sum();
  }
  return post;
}

double sup_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

struct RestartOutcome {
  FitResult fit;
  bool failed = false;
  std::string error;
};

RestartOutcome run_restart(const ProfileModel& model, ModelParams params, const EMConfig& config) {
  RestartOutcome out;
  FitResult& fit = out.fit;
  const auto& layout = model.layout();
  try {
    validate(params, model.data().levels, model.data().items);
    HazardSteps hazard = profiled(model, params, prior_posterior(model.size(), params.pi));
    double loglik = 0.0;
    Posterior posterior = e_step_with_loglik(model, params, hazard, loglik);
    fit.loglik_trace.push_back(loglik);
    Eigen::MatrixXd warm;

    for (fit.n_iter = 1; fit.n_iter <= config.max_iter; ++fit.n_iter) {
      const Eigen::VectorXd mass = posterior.gamma.colwise().sum().transpose();
      if (mass.minCoeff() < kMinColumnMass) {
        throw NumericError("group collapsed: posterior column mass " +
                           std::to_string(mass.minCoeff()) + " below one observation");
      }
      ModelParams current = params;
      current.pi = m_step_pi(posterior);
      if (current.pi.minCoeff() < kMinWeight) {
        throw NumericError("group collapsed: mixture weight below 1e-6");
      }
      MStepResult step =
          m_step_theta(model, posterior, current, config, warm.size() > 0 ? &warm : nullptr);
      warm = std::move(step.inverse_hessian);

      const HazardSteps next_hazard = profiled(model, step.params, posterior);
      double next_loglik = 0.0;
      Posterior next_posterior = e_step_with_loglik(model, step.params, next_hazard, next_loglik);
      fit.loglik_trace.push_back(next_loglik);

      const double param_change =
          std::max(sup_norm(layout.pack(step.params) - layout.pack(params)),
                   sup_norm(step.params.pi - params.pi));
      const double loglik_change =
          std::abs(next_loglik - loglik) / std::max(std::abs(loglik), 1e-300);

      params = std::move(step.params);
      hazard = next_hazard;
      loglik = next_loglik;
      posterior = std::move(next_posterior);
      fit.score_norm = sup_norm(model.evaluate(params, posterior, false).gradient);

      if (loglik_change < config.tol_loglik && param_change < config.tol_param &&
          fit.score_norm < config.tol_score) {
        fit.converged = true;
        break;
      }
    }
    fit.n_iter = std::min(fit.n_iter, config.max_iter);

    relabel_by_theta(params, hazard, posterior);
    fit.score_norm = sup_norm(model.evaluate(params, posterior, false).gradient);
    fit.params = std::move(params);
    fit.hazard = std::move(hazard);
    fit.posterior = std::move(posterior);
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
    fit.converged = false;
  }
  return out;
}

void attach_inference(const ProfileModel& model, InformationMethod method, FitResult& fit) {
  const auto& layout = model.layout();
  fit.parameter_names = layout.names();
  fit.estimates = layout.pack(fit.params);
  const InfoMatrix info = method == InformationMethod::reprofiled
                               ? reprofiled_information(model, fit.params, &fit.posterior)
                               : information_matrix(model, fit.params, fit.posterior);
  fit.info_matrix = info.matrix;
  fit.condition_number = info.condition_number;
  try {
    fit.std_errors = standard_errors(info, model.size());
  } catch (const SingularInformation& e) {
    fit.singular_information = true;
    fit.std_errors = pseudo_standard_errors(info, model.size());
    std::ostringstream msg;
    msg << "singular information (condition number " << info.condition_number
        << "); pseudo-inverse standard errors reported; null direction:";
    for (Eigen::Index k = 0; k < e.null_direction.size(); ++k) {
      if (std::abs(e.null_direction[k]) > 0.1) {
        msg << ' ' << fit.parameter_names[static_cast<std::size_t>(k)] << '='
            << e.null_direction[k];
      }
    }
    if (!fit.diagnostic.empty()) fit.diagnostic += "; ";
    fit.diagnostic += msg.str();
  }
}

}  // namespace

void validate(const EMConfig& config) {
  if (!(config.tol_loglik > 0.0) || !(config.tol_param > 0.0) || !(config.tol_score > 0.0)) {
    throw InputError("EM tolerances must be positive");
  }
  if (config.max_iter < 1) throw InputError("max_iter must be at least 1");
  if (config.n_restarts < 1) throw InputError("n_restarts must be at least 1");
  if (config.threads < 1) throw InputError("threads must be at least 1");
}

Posterior e_step(const ProfileModel& model, const ModelParams& params,
                 const HazardSteps& hazard) {
  double loglik = 0.0;
  return e_step_with_loglik(model, params, hazard, loglik);
}

Eigen::VectorXd m_step_pi(const Posterior& posterior) {
  if (posterior.subjects() == 0) throw InputError("empty posterior");
  Eigen::VectorXd pi = posterior.gamma.colwise().mean().transpose();
  return pi / pi.sum();
}

MStepResult m_step_theta(const ProfileModel& model, const Posterior& posterior,
                         const ModelParams& current, const EMConfig& config,
                         const Eigen::MatrixXd* warm_inverse_hessian) {
  const auto& layout = model.layout();
  Objective analytic = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    try {
      const auto ev = model.evaluate(layout.unpack(x, current), posterior, false);
      if (grad != nullptr) *grad = -ev.gradient;
      return -ev.value;
    } catch (const NumericError&) {
      if (grad != nullptr) grad->setConstant(x.size(), std::numeric_limits<double>::quiet_NaN());
      return std::numeric_limits<double>::infinity();
    }
  };

  const Eigen::VectorXd x0 = layout.pack(current);
  MStepResult out;
  Eigen::VectorXd g0(x0.size());
  out.objective_before = -analytic(x0, &g0);
  if (!std::isfinite(out.objective_before)) {
    throw OptimizerFailure("M-step objective is not finite at the starting point", x0);
  }

  Objective objective = analytic;
  if (config.self_check) {
    const Eigen::VectorXd fd = numeric_gradient(analytic, x0, 1e-6);
    const double gap = sup_norm(fd - g0) / std::max(1.0, sup_norm(fd));
    if (gap > kSelfCheckTol) {
      out.used_numeric_gradient = true;
      objective = [analytic](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        const double v = analytic(x, nullptr);
        if (grad != nullptr) *grad = numeric_gradient(analytic, x, 1e-6);
        return v;
      };
    }
  }

  QuasiNewtonOptions opts;
  opts.gradient_tol = std::min(1e-6, config.tol_score);
  QuasiNewtonResult res = minimize_bfgs(objective, x0, opts, warm_inverse_hessian);
  if (!res.converged && warm_inverse_hessian != nullptr) {
    QuasiNewtonResult cold = minimize_bfgs(objective, res.x, opts);
    cold.iterations += res.iterations;
    res = std::move(cold);
  }

  out.params = layout.unpack(res.x, current);
  out.objective_after = -res.value;
  out.gradient_norm = sup_norm(res.gradient);
  out.converged = res.converged;
  out.iterations = res.iterations;
  out.inverse_hessian = std::move(res.inverse_hessian);
  return out;
}

Eigen::VectorXd subject_loglik(const ProfileModel& model, const ModelParams& params,
                               const HazardSteps& hazard) {
  Eigen::MatrixXd joint;
  return log_mixture(model, params, hazard, joint);
}

double observed_loglik(const ProfileModel& model, const ModelParams& params,
                       const HazardSteps& hazard) {
  Eigen::MatrixXd joint;
  const double value = log_mixture(model, params, hazard, joint).sum();
  if (!std::isfinite(value)) throw NumericError("observed log-likelihood is not finite");
  return value;
}

std::vector<int> relabel_by_theta(ModelParams& params, HazardSteps& hazard,
                                  Posterior& posterior) {
  const int groups = params.groups();
  std::vector<int> perm(static_cast<std::size_t>(groups));
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](int x, int y) { return params.theta[x] < params.theta[y]; });

  const double shift = params.theta[perm[0]];
  Eigen::VectorXd theta(groups);
  Eigen::VectorXd pi(groups);
  RowMatrix gamma(posterior.gamma.rows(), groups);
  for (int k = 0; k < groups; ++k) {
    const auto old = perm[static_cast<std::size_t>(k)];
    theta[k] = params.theta[old] - shift;
    pi[k] = params.pi[old];
    if (posterior.gamma.cols() == groups) gamma.col(k) = posterior.gamma.col(old);
  }
  theta[0] = 0.0;
  params.theta = theta;
  params.pi = pi;
  if (posterior.gamma.cols() == groups) posterior.gamma = gamma;
  if (shift != 0.0) {
    params.ordinal.a += shift * params.ordinal.phi;
    params.ordinal.a[0] = 0.0;
    const double scale = std::exp(shift * params.survival.delta0);
    for (double& jump : hazard.jumps) jump *= scale;
  }
  return perm;
}

ModelParams default_start(int groups, int levels, int items) {
  if (groups < 1 || levels < 2 || items < 1) throw InputError("invalid model dimensions");
  ModelParams p;
  p.theta = Eigen::VectorXd::LinSpaced(groups, 0.0, static_cast<double>(groups - 1));
  p.pi = Eigen::VectorXd::Constant(groups, 1.0 / groups);
  p.ordinal.a = Eigen::VectorXd::Zero(levels);
  p.ordinal.b = Eigen::VectorXd::Zero(items);
  p.ordinal.phi = Eigen::VectorXd::LinSpaced(levels, 0.0, 1.0);
  return p;
}

ModelParams random_start(int groups, int levels, int items, std::uint64_t seed) {
  ModelParams p = default_start(groups, levels, items);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> narrow(0.0, 0.5);
  std::exponential_distribution<double> gamma1(1.0);

  for (int r = 0; r < groups; ++r) p.theta[r] = unit(rng);
  std::sort(p.theta.begin(), p.theta.end());
  p.theta.array() -= p.theta[0];

  for (int r = 0; r < groups; ++r) p.pi[r] = gamma1(rng);
  p.pi /= p.pi.sum();

  for (int l = 1; l < levels; ++l) p.ordinal.a[l] = narrow(rng);
  for (int j = 1; j < items; ++j) p.ordinal.b[j] = narrow(rng);
  Eigen::VectorXd u(levels - 2);
  for (auto& value : u) value = narrow(rng);
  p.ordinal.phi = phi_from_free(u);
  p.survival.delta0 = narrow(rng);
  p.survival.delta1 = narrow(rng);
  return p;
}

FitResult em_fit(const Dataset& data, int groups, const EMConfig& config,
                 const std::optional<ModelParams>& init) {
  validate(config);
  if (data.size() == 0) throw InputError("dataset is empty");
  if (groups < 1) throw InputError("number of groups must be at least 1");
  if (init && init->groups() != groups) throw InputError("initial values have the wrong number of groups");
  if (init) validate(*init, data.levels, data.items);
  const ProfileModel model(data, groups);

  const auto restarts = static_cast<std::size_t>(config.n_restarts);
  std::vector<RestartOutcome> outcomes(restarts);
  detail::parallel_for(restarts, config.threads, [&](std::size_t k) {
    ModelParams start;
    try {
      start = k == 0 ? (init ? *init : default_start(groups, data.levels, data.items))
                     : random_start(groups, data.levels, data.items,
                                    detail::derive_seed(config.seed, k));
    } catch (const std::exception& e) {
      outcomes[k].failed = true;
      outcomes[k].error = e.what();
      return;
    }
    outcomes[k] = run_restart(model, std::move(start), config);
  });

  int best = -1;
  int failed = 0;
  std::string errors;
  for (std::size_t k = 0; k < restarts; ++k) {
    const auto& o = outcomes[k];
    if (o.failed) {
      ++failed;
      if (!errors.empty()) errors += "; ";
      errors += "restart " + std::to_string(k) + ": " + o.error;
      continue;
    }
    if (best < 0 || o.fit.loglik_trace.back() >
                        outcomes[static_cast<std::size_t>(best)].fit.loglik_trace.back()) {
      best = static_cast<int>(k);
    }
  }

  FitResult fit;
  if (best < 0) {
    // keep the longest partial trace for diagnosis
    std::size_t longest = 0;
    for (std::size_t k = 1; k < restarts; ++k) {
      if (outcomes[k].fit.loglik_trace.size() > outcomes[longest].fit.loglik_trace.size()) {
        longest = k;
      }
    }
    fit.loglik_trace = outcomes[longest].fit.loglik_trace;
    fit.n_iter = outcomes[longest].fit.n_iter;
    fit.params = init ? *init : default_start(groups, data.levels, data.items);
    fit.parameter_names = model.layout().names();
    fit.converged = false;
    fit.failed_restarts = failed;
    fit.diagnostic = "all restarts failed: " + errors;
    return fit;
  }

  fit = std::move(outcomes[static_cast<std::size_t>(best)].fit);
  fit.restart = best;
  fit.failed_restarts = failed;
  if (!fit.converged) fit.diagnostic = "EM stopped at max_iter before meeting the tolerances";
  if (failed > 0) {
    if (!fit.diagnostic.empty()) fit.diagnostic += "; ";
    fit.diagnostic += errors;
  }
  try {
    attach_inference(model, config.information, fit);
  } catch (const NumericError& e) {
    fit.converged = false;
    if (!fit.diagnostic.empty()) fit.diagnostic += "; ";
    fit.diagnostic += std::string("inference failed: ") + e.what();
  }
  return fit;
}

}  // namespace jointmix
