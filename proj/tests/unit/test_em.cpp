#include "jointmix/em_engine.hpp"
#include "jointmix/errors.hpp"
#include "jointmix/ordinal_model.hpp"
#include "jointmix/profile_model.hpp"
#include "jointmix/survival_model.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace jointmix;
using namespace test_support;

namespace {

ModelParams desk_truth() { return default_design().truth; }

HazardSteps hazard_at(const ProfileModel& model, const ModelParams& p) {
  const Posterior prior = prior_posterior(model.size(), p.pi);
  return profile_hazard(model.data(), prior, p.theta, p.survival);
}

EMConfig long_run() {
  EMConfig c;
  c.max_iter = 20000;
  c.n_restarts = 2;
  return c;
}

}  // namespace

TEST_CASE("E-step is Bayes' rule on the component likelihoods") {
  const SimulatedData sim = simulate(60, 3);
  const ProfileModel model(sim.data, 2);
  const ModelParams p = desk_truth();
  const HazardSteps h = hazard_at(model, p);
  const Posterior post = e_step(model, p, h);
  for (std::size_t i = 0; i < sim.data.size(); ++i) {
    const auto& s = sim.data.subjects[i];
    Eigen::Vector2d w;
    for (int r = 0; r < 2; ++r) {
      w[r] = p.pi[r] * std::exp(ordinal_loglik(s.responses, p.theta[r], p.ordinal) +
                                survival_loglik(s.survival, r, h, p.theta, p.survival));
    }
    w /= w.sum();
    const auto row = static_cast<Eigen::Index>(i);
    CHECK(post.gamma(row, 0) == doctest::Approx(w[0]).epsilon(1e-12));
    CHECK(post.gamma.row(row).sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
  const Eigen::VectorXd per = subject_loglik(model, p, h);
  CHECK(per.sum() == doctest::Approx(observed_loglik(model, p, h)).epsilon(1e-14));
}

TEST_CASE("mixture weights are posterior column means") {
  Posterior post;
  post.gamma.resize(3, 2);
  post.gamma << 0.2, 0.8, 0.5, 0.5, 1.0, 0.0;
  const Eigen::VectorXd pi = m_step_pi(post);
  CHECK(pi[0] == doctest::Approx(1.7 / 3.0));
  CHECK(pi[1] == doctest::Approx(1.3 / 3.0));
}

TEST_CASE("profile objective gradient matches central differences") {
  std::mt19937_64 rng(41);
  const SimulatedData sim = simulate(70, 4);
  const ProfileModel model(sim.data, 2);
  const ModelParams p = random_params(2, 3, 2, rng);
  const Posterior post = random_posterior(sim.data.size(), 2, rng);
  const auto& layout = model.layout();
  const auto f = [&](const Eigen::VectorXd& x) {
    return model.evaluate(layout.unpack(x, p), post, false).value;
  };
  const auto eval = model.evaluate(p, post, true);
  const Eigen::VectorXd fd = central_difference(f, layout.pack(p));
  CHECK((eval.gradient - fd).cwiseAbs().maxCoeff() < 1e-7);
  // per-subject scores average to the gradient
  CHECK((eval.scores.colwise().mean().transpose() - eval.gradient).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("M-step for Theta increases Q and lands on a local maximum") {
  const SimulatedData sim = simulate(150, 5);
  const ProfileModel model(sim.data, 2);
  const ModelParams start = default_start(2, 3, 2);
  const HazardSteps h = hazard_at(model, start);
  const Posterior post = e_step(model, start, h);
  EMConfig config;
  config.tol_score = 1e-9;
  const MStepResult res = m_step_theta(model, post, start, config);
  CHECK(res.converged);
  CHECK(res.objective_after >= res.objective_before);
  CHECK(res.gradient_norm <= 1e-8);

  // grid search around the optimum along every coordinate and pair of coordinates
  const auto& layout = model.layout();
  const Eigen::VectorXd x = layout.pack(res.params);
  const double best = model.evaluate(res.params, post, false).value;
  CHECK(best == doctest::Approx(res.objective_after).epsilon(1e-12));
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    for (Eigen::Index m = k; m < x.size(); ++m) {
      for (double step : {-1e-2, -1e-3, 1e-3, 1e-2}) {
        Eigen::VectorXd y = x;
        y[k] += step;
        if (m != k) y[m] -= step;
        CHECK(model.evaluate(layout.unpack(y, res.params), post, false).value <= best + 1e-14);
      }
    }
  }
}

TEST_CASE("self-check mode keeps the analytic gradient when it is correct") {
  const SimulatedData sim = simulate(80, 6);
  const ProfileModel model(sim.data, 2);
  const ModelParams start = default_start(2, 3, 2);
  const Posterior post = e_step(model, start, hazard_at(model, start));
  EMConfig config;
  config.self_check = true;
  const MStepResult res = m_step_theta(model, post, start, config);
  CHECK_FALSE(res.used_numeric_gradient);
  CHECK(res.objective_after >= res.objective_before);
}

TEST_CASE("relabeling by theta leaves the likelihood unchanged") {
  const SimulatedData sim = simulate(90, 7);
  const ProfileModel model(sim.data, 2);
  ModelParams p = desk_truth();
  // swap the labels and re-anchor at the new first group: theta = (0, -1)
  ModelParams q = p;
  q.theta = Eigen::Vector2d(0.0, -1.0);
  q.pi = Eigen::Vector2d(p.pi[1], p.pi[0]);
  q.ordinal.a = p.ordinal.a + p.ordinal.phi;  // absorbs the shift c = 1
  HazardSteps hq = hazard_at(model, q);
  const double before = observed_loglik(model, q, hq);
  Posterior post = e_step(model, q, hq);
  const std::vector<int> perm = relabel_by_theta(q, hq, post);
  CHECK(perm == std::vector<int>{1, 0});
  CHECK(q.theta[0] == 0.0);
  CHECK(q.theta[1] == doctest::Approx(1.0));
  CHECK(q.pi[0] == doctest::Approx(p.pi[0]));
  CHECK((q.ordinal.a - p.ordinal.a).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(observed_loglik(model, q, hq) == doctest::Approx(before).epsilon(1e-12));
  CHECK((post.gamma - e_step(model, q, hq).gamma).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("starting points") {
  const ModelParams d = default_start(3, 4, 2);
  CHECK(d.theta.isApprox(Eigen::Vector3d(0.0, 1.0, 2.0)));
  CHECK(d.pi.isApprox(Eigen::Vector3d::Constant(1.0 / 3.0)));
  CHECK(d.ordinal.phi.isApprox(Eigen::Vector4d(0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ModelParams r = random_start(3, 4, 2, seed);
    CHECK_NOTHROW(validate(r, 4, 2));
    CHECK(r.theta[0] == 0.0);
    CHECK(r.pi.sum() == doctest::Approx(1.0));
    const ModelParams again = random_start(3, 4, 2, seed);
    CHECK(again.theta == r.theta);
  }
  CHECK_THROWS_AS(default_start(0, 3, 2), InputError);
}

TEST_CASE("configuration validation") {
  EMConfig c;
  CHECK_NOTHROW(validate(c));
  c.max_iter = 0;
  CHECK_THROWS_AS(validate(c), InputError);
  c = {};
  c.tol_loglik = -1.0;
  CHECK_THROWS_AS(validate(c), InputError);
  c = {};
  c.threads = 0;
  CHECK_THROWS_AS(validate(c), InputError);
}

TEST_CASE("EM trace is nondecreasing and the fit satisfies the score equation") {
  const SimulatedData sim = simulate(200, 8);
  const FitResult fit = em_fit(sim.data, 2, long_run());
  REQUIRE(fit.converged);
  for (std::size_t k = 1; k < fit.loglik_trace.size(); ++k) {
    CHECK(fit.loglik_trace[k] >= fit.loglik_trace[k - 1] - 1e-10);
  }
  CHECK(fit.score_norm <= 1e-6);
  CHECK(fit.params.theta[0] == 0.0);
  CHECK(fit.params.theta[1] >= 0.0);
  CHECK(fit.posterior.gamma.rows() == 200);
  CHECK(fit.std_errors.size() == fit.estimates.size());
  CHECK(fit.parameter_names.front() == "theta2");
  // the reported hazard is the profiled hazard at the reported posterior
  const ProfileModel model(sim.data, 2);
  const HazardSteps h =
      profile_hazard(sim.data, fit.posterior, fit.params.theta, fit.params.survival);
  for (std::size_t k = 0; k < h.jumps.size(); ++k) {
    CHECK(h.jumps[k] == doctest::Approx(fit.hazard.jumps[k]).epsilon(1e-6));
  }
  CHECK(observed_loglik(model, fit.params, fit.hazard) ==
        doctest::Approx(fit.loglik_trace.back()).epsilon(1e-12));
}

TEST_CASE("EM is deterministic and independent of the thread count") {
  const SimulatedData sim = simulate(120, 9);
  EMConfig c = long_run();
  c.n_restarts = 3;
  const FitResult a = em_fit(sim.data, 2, c);
  c.threads = 3;
  const FitResult b = em_fit(sim.data, 2, c);
  CHECK(a.loglik_trace == b.loglik_trace);
  CHECK(a.estimates == b.estimates);
  CHECK(a.restart == b.restart);
}

TEST_CASE("iteration cap returns a partial trace") {
  const SimulatedData sim = simulate(100, 10);
  EMConfig c;
  c.max_iter = 1;
  c.n_restarts = 1;
  const FitResult fit = em_fit(sim.data, 2, c);
  CHECK_FALSE(fit.converged);
  CHECK_FALSE(fit.loglik_trace.empty());
  CHECK(fit.n_iter == 1);
}

TEST_CASE("single group fit") {
  const SimulatedData sim = simulate(150, 11, 1);
  const FitResult fit = em_fit(sim.data, 1, long_run());
  REQUIRE(fit.converged);
  CHECK(fit.params.theta.size() == 1);
  CHECK(fit.params.pi[0] == 1.0);
  CHECK(fit.estimates.size() == 5);
  CHECK(fit.score_norm <= 1e-6);
}

TEST_CASE("input errors") {
  const SimulatedData sim = simulate(30, 12);
  CHECK_THROWS_AS(em_fit(sim.data, 0, {}), InputError);
  CHECK_THROWS_AS(em_fit(sim.data, 3, {}, desk_truth()), InputError);
}
