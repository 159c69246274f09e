#include "jointmix/simulation.hpp"

#include "jointmix/errors.hpp"
#include "jointmix/ordinal_model.hpp"
#include "jointmix/param_layout.hpp"
#include "parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

namespace jointmix {

namespace {

// Probabilists' Gauss-Hermite rule (Golub-Welsch) for E f(X), X ~ N(0, 1).
void hermite_rule(int nodes, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(nodes, nodes);
  for (int k = 1; k < nodes; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  x = eig.eigenvalues();
  w = eig.eigenvectors().row(0).transpose().array().square();
}

// int_0^c exp(-scale * Lambda0(t)) dt in closed form.
double integrated_survival(const BaselineHazard& base, double scale, double c) {
  double total = 0.0;
  double start = 0.0;
  double cum = 0.0;
  for (std::size_t k = 0; k < base.rates.size() && start < c; ++k) {
    const double end = k < base.cuts.size() ? std::min(base.cuts[k], c) : c;
    const double rate = base.rates[k] * scale;
    const double width = end - start;
    total += rate > 0.0 ? std::exp(-scale * cum) * -std::expm1(-rate * width) / rate
                        : std::exp(-scale * cum) * width;
    cum += base.rates[k] * width;
    start = end;
  }
  return total;
}

// Averages f(x) over the covariate law.
template <typename F>
double covariate_mean(const CovariateDist& dist, F&& f) {
  if (dist.kind == CovariateDist::Kind::two_point) {
    return (1.0 - dist.p) * f(0.0) + dist.p * f(1.0);
  }
  static const auto rule = [] {
    std::pair<Eigen::VectorXd, Eigen::VectorXd> out;
    hermite_rule(60, out.first, out.second);
    return out;
  }();
  const auto& [x, w] = rule;
  double total = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) total += w[k] * f(x[k]);
  return total;
}

double censoring_given(const SimDesign& design, const BaselineHazard& base, double scale) {
  const auto& cens = design.censoring;
  switch (cens.kind) {
    case Censoring::Kind::none:
      return 0.0;
    case Censoring::Kind::uniform:
      return integrated_survival(base, scale, cens.parameter) / cens.parameter;
    case Censoring::Kind::exponential: {
      // P(C < T) = int_0^inf kappa e^{-kappa t} S(t) dt, piecewise closed form
      double total = 0.0;
      double start = 0.0;
      double cum = 0.0;
      const double kappa = cens.parameter;
      for (std::size_t k = 0; k < base.rates.size(); ++k) {
        const double end =
            k < base.cuts.size() ? base.cuts[k] : std::numeric_limits<double>::infinity();
        const double rate = base.rates[k] * scale + kappa;
        const double head = std::exp(-scale * cum - kappa * start);
        const double tail = std::isfinite(end) ? -std::expm1(-rate * (end - start)) : 1.0;
        total += kappa * head * tail / rate;
        if (std::isfinite(end)) cum += base.rates[k] * (end - start);
        start = end;
      }
      return total;
    }
  }
  return 0.0;
}

}  // namespace

double BaselineHazard::rate_at(double t) const {
  const auto k = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), t) -
                                          cuts.begin());
  return rates[k];
}

double BaselineHazard::cumulative(double t) const {
  double cum = 0.0;
  double start = 0.0;
  for (std::size_t k = 0; k < rates.size(); ++k) {
    const double end = k < cuts.size() ? std::min(cuts[k], t) : t;
    if (end <= start) break;
    cum += rates[k] * (end - start);
    start = end;
  }
  return cum;
}

double BaselineHazard::inverse_cumulative(double target) const {
  double cum = 0.0;
  double start = 0.0;
  for (std::size_t k = 0; k < rates.size(); ++k) {
    const bool last = k >= cuts.size();
    const double width = last ? std::numeric_limits<double>::infinity() : cuts[k] - start;
    if (last || cum + rates[k] * width >= target) {
      return start + (target - cum) / rates[k];
    }
    cum += rates[k] * width;
    start = cuts[k];
  }
  return start;
}

void validate(const SimDesign& d) {
  if (d.n < 1) throw InputError("design needs n >= 1");
  if (d.groups < 1 || d.levels < 2 || d.items < 1 || d.times < 1) {
    throw InputError("design dimensions must satisfy R >= 1, L >= 2, J >= 1, M >= 1");
  }
  const auto& t = d.truth;
  if (t.theta.size() != d.groups || t.pi.size() != d.groups) {
    throw InputError("design truth does not match the number of groups");
  }
  if (t.theta[0] != 0.0) throw InputError("design theta[1] must be 0");
  for (int r = 1; r < d.groups; ++r) {
    if (!(t.theta[r] >= t.theta[r - 1])) throw InputError("design theta must be nondecreasing");
  }
  if ((t.pi.array() < 0.0).any() || std::abs(t.pi.sum() - 1.0) > 1e-9) {
    throw InputError("design pi must be a probability vector");
  }
  validate(t.ordinal, d.levels, d.items);
  if (!std::isfinite(t.survival.delta0) || !std::isfinite(t.survival.delta1)) {
    throw InputError("design survival coefficients must be finite");
  }
  const auto& base = d.baseline;
  if (base.rates.empty() || base.rates.size() != base.cuts.size() + 1) {
    throw InputError("baseline needs one more rate than cut points");
  }
  for (double r : base.rates) {
    if (!(r > 0.0) || !std::isfinite(r)) throw InputError("baseline rates must be positive");
  }
  for (std::size_t k = 0; k < base.cuts.size(); ++k) {
    if (!(base.cuts[k] > (k == 0 ? 0.0 : base.cuts[k - 1]))) {
      throw InputError("baseline cut points must be positive and increasing");
    }
  }
  if (d.censoring.kind != Censoring::Kind::none &&
      (!(d.censoring.parameter > 0.0) || !std::isfinite(d.censoring.parameter))) {
    throw InputError("censoring parameter must be positive");
  }
  if (d.covariate.kind == CovariateDist::Kind::two_point &&
      !(d.covariate.p >= 0.0 && d.covariate.p <= 1.0)) {
    throw InputError("two-point covariate probability must lie in [0, 1]");
  }
  if (!(d.missing_prob >= 0.0 && d.missing_prob < 1.0)) {
    throw InputError("missing_prob must lie in [0, 1)");
  }
}

double expected_censoring(const SimDesign& design) {
  const auto& t = design.truth;
  double total = 0.0;
  for (int r = 0; r < design.groups; ++r) {
    if (t.pi[r] == 0.0) continue;
    total += t.pi[r] * covariate_mean(design.covariate, [&](double x) {
      const double scale = std::exp(t.theta[r] * t.survival.delta0 + x * t.survival.delta1);
      return censoring_given(design, design.baseline, scale);
    });
  }
  return total;
}

double tune_uniform_censoring(const SimDesign& design, double target) {
  if (!(target > 0.0 && target < 1.0)) throw InputError("censoring target must lie in (0, 1)");
  SimDesign probe = design;
  probe.censoring.kind = Censoring::Kind::uniform;
  // censored fraction decreases in c_max; bisect on log c_max
  double lo = std::log(1e-8);
  double hi = std::log(1e8);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    probe.censoring.parameter = std::exp(mid);
    if (expected_censoring(probe) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

SimDesign default_design() {
  SimDesign d;
  d.n = 500;
  d.groups = 2;
  d.levels = 3;
  d.items = 2;
  d.times = 3;
  d.truth.theta = Eigen::Vector2d(0.0, 1.0);
  d.truth.pi = Eigen::Vector2d(0.4, 0.6);
  d.truth.ordinal.a = Eigen::Vector3d(0.0, 0.5, 0.0);
  d.truth.ordinal.phi = Eigen::Vector3d(0.0, 0.5, 1.0);
  d.truth.ordinal.b = Eigen::Vector2d(0.0, -0.5);
  d.truth.survival = {0.5, -0.5};
  d.baseline = BaselineHazard::constant(0.1);
  d.covariate = {CovariateDist::Kind::normal, 0.5};
  d.censoring = {Censoring::Kind::uniform, 1.0};
  d.censoring.parameter = tune_uniform_censoring(d, 0.25);
  return d;
}

SimulatedData generate_dataset(const SimDesign& design) {
  validate(design);
  const auto& truth = design.truth;
  std::mt19937_64 rng(design.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);

  std::vector<Eigen::MatrixXd> cdf(static_cast<std::size_t>(design.groups));
  for (int r = 0; r < design.groups; ++r) {
    Eigen::MatrixXd probs = category_log_probs(truth.theta[r], truth.ordinal).array().exp();
    for (Eigen::Index l = 1; l < probs.cols(); ++l) probs.col(l) += probs.col(l - 1);
    cdf[static_cast<std::size_t>(r)] = probs;
  }
  Eigen::VectorXd pi_cdf = truth.pi;
  for (Eigen::Index r = 1; r < pi_cdf.size(); ++r) pi_cdf[r] += pi_cdf[r - 1];

  SimulatedData out;
  out.data.levels = design.levels;
  out.data.items = design.items;
  out.data.subjects.resize(static_cast<std::size_t>(design.n));
  out.labels.resize(static_cast<std::size_t>(design.n));
  int censored = 0;
  for (int i = 0; i < design.n; ++i) {
    auto& s = out.data.subjects[static_cast<std::size_t>(i)];
    s.id = std::to_string(i + 1);
    const double draw = unif(rng);
    int r = 0;
    while (r + 1 < design.groups && (draw >= pi_cdf[r] || truth.pi[r] == 0.0)) ++r;
    out.labels[static_cast<std::size_t>(i)] = r;

    const double x = design.covariate.kind == CovariateDist::Kind::normal
                         ? normal(rng)
                         : (unif(rng) < design.covariate.p ? 1.0 : 0.0);

    const auto& c = cdf[static_cast<std::size_t>(r)];
    for (int m = 0; m < design.times; ++m) {
      for (int j = 0; j < design.items; ++j) {
        const double u = unif(rng);
        if (design.missing_prob > 0.0 && unif(rng) < design.missing_prob) continue;
        int level = 0;
        while (level + 1 < design.levels && u >= c(j, level)) ++level;
        s.responses.cells.push_back({j, m + 1, level});
      }
    }

    const double eta = truth.theta[r] * truth.survival.delta0 + x * truth.survival.delta1;
    const double failure = design.baseline.inverse_cumulative(expo(rng) * std::exp(-eta));
    double cens = std::numeric_limits<double>::infinity();
    switch (design.censoring.kind) {
      case Censoring::Kind::none:
        break;
      case Censoring::Kind::uniform:
        do {
          cens = unif(rng) * design.censoring.parameter;
        } while (cens <= 0.0);
        break;
      case Censoring::Kind::exponential:
        cens = expo(rng) / design.censoring.parameter;
        break;
    }
    s.survival.covariate = x;
    if (failure <= cens) {
      s.survival.time = failure;
      s.survival.event = 1;
    } else {
      s.survival.time = cens;
      s.survival.event = 0;
      ++censored;
    }
  }
  out.censored_fraction = static_cast<double>(censored) / design.n;
  if (out.censored_fraction > 0.8) {
    out.warnings.push_back("realized censoring fraction " +
                           std::to_string(out.censored_fraction) + " exceeds 80%");
  }
  return out;
}

MCReport mc_normality(const SimDesign& design, int replications, const MCOptions& options) {
  validate(design);
  validate(options.fit);
  if (replications < 0) throw InputError("replications must be nonnegative");
  MCReport report;
  report.replications = replications;
  report.seed = design.seed;

  const ParamLayout layout(design.groups, design.levels, design.items);
  const Eigen::VectorXd truth = layout.pack(design.truth);
  const auto names = layout.names();

  EMConfig fit_config = options.fit;
  fit_config.threads = 1;
  std::optional<ModelParams> init;
  if (options.init_at_truth && (design.truth.pi.array() > 0.0).all()) init = design.truth;

  report.records.resize(static_cast<std::size_t>(replications));
  detail::parallel_for(report.records.size(), options.fit.threads, [&](std::size_t k) {
    auto& rec = report.records[k];
    rec.index = static_cast<int>(k);
    rec.seed = detail::derive_seed(design.seed, k);
    try {
      SimDesign local = design;
      local.seed = rec.seed;
      const SimulatedData sim = generate_dataset(local);
      rec.censored_fraction = sim.censored_fraction;
      const FitResult fit = em_fit(sim.data, design.groups, fit_config, init);
      rec.converged = fit.converged;
      rec.n_iter = fit.n_iter;
      rec.loglik = fit.loglik_trace.empty() ? 0.0 : fit.loglik_trace.back();
      rec.estimates = fit.estimates;
      rec.std_errors = fit.std_errors;
      rec.success = fit.converged && !fit.singular_information && fit.std_errors.size() > 0 &&
                    fit.std_errors.allFinite() && (fit.std_errors.array() > 0.0).all();
      rec.message = fit.diagnostic;
    } catch (const std::exception& e) {
      rec.success = false;
      rec.message = e.what();
    }
  });

  std::vector<const ReplicationRecord*> ok;
  for (const auto& rec : report.records) {
    if (rec.success) {
      ok.push_back(&rec);
    } else {
      ++report.failures;
    }
  }
  report.failure_flag = replications > 0 && report.failures * 10 > replications;
  if (ok.empty()) return report;

  const auto count = static_cast<double>(ok.size());
  for (Eigen::Index p = 0; p < truth.size(); ++p) {
    ParameterSummary sum;
    sum.name = names[static_cast<std::size_t>(p)];
    sum.truth = truth[p];
    double covered = 0.0;
    for (const auto* rec : ok) {
      sum.mean += rec->estimates[p];
      sum.mean_se += rec->std_errors[p];
      if (std::abs(rec->estimates[p] - truth[p]) <= 1.96 * rec->std_errors[p]) covered += 1.0;
    }
    sum.mean /= count;
    sum.mean_se /= count;
    double ss = 0.0;
    for (const auto* rec : ok) ss += (rec->estimates[p] - sum.mean) * (rec->estimates[p] - sum.mean);
    sum.sd = ok.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
    sum.sd_se_ratio = sum.mean_se > 0.0 ? sum.sd / sum.mean_se : 0.0;
    sum.coverage = covered / count;
    report.parameters.push_back(sum);
  }
  return report;
}

}  // namespace jointmix
