#include "jointmix/optimizer.hpp"

#include <cmath>

namespace jointmix {

QuasiNewtonResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                                const QuasiNewtonOptions& options,
                                const Eigen::MatrixXd* initial_inverse_hessian) {
  const auto p = x0.size();
  QuasiNewtonResult res;
  res.x = x0;
  res.gradient.resize(p);
  res.value = f(res.x, &res.gradient);
  bool scaled = false;
  if (initial_inverse_hessian != nullptr && initial_inverse_hessian->rows() == p &&
      initial_inverse_hessian->allFinite()) {
    res.inverse_hessian = *initial_inverse_hessian;
    scaled = true;
  } else {
    res.inverse_hessian = Eigen::MatrixXd::Identity(p, p);
  }
  if (!std::isfinite(res.value) || !res.gradient.allFinite()) return res;

  constexpr double armijo = 1e-4;
  constexpr double roundoff = 1e-14;
  const double start_value = res.value;
  Eigen::VectorXd trial_grad(p);
  for (res.iterations = 0; res.iterations < options.max_iter; ++res.iterations) {
    if (res.gradient.lpNorm<Eigen::Infinity>() <= options.gradient_tol) {
      res.converged = true;
      return res;
    }
    Eigen::VectorXd dir = -res.inverse_hessian * res.gradient;
    double slope = res.gradient.dot(dir);
    if (!(slope < 0.0) || !dir.allFinite()) {
      res.inverse_hessian.setIdentity();
      scaled = false;
      dir = -res.gradient;
      slope = res.gradient.dot(dir);
    }
    const double longest = dir.lpNorm<Eigen::Infinity>();
    if (longest > options.max_step) {
      dir *= options.max_step / longest;
      slope = res.gradient.dot(dir);
    }

    double step = 1.0;
    double trial_value = 0.0;
    Eigen::VectorXd trial;
    bool accepted = false;
    const double ceiling = std::min(res.value, start_value) + roundoff * std::abs(start_value);
    const double grad_norm = res.gradient.lpNorm<Eigen::Infinity>();
    for (int halvings = 0; halvings < 60; ++halvings, step *= 0.5) {
      trial = res.x + step * dir;
      trial_value = f(trial, &trial_grad);
      if (!std::isfinite(trial_value) || !trial_grad.allFinite()) continue;
      const bool sufficient = trial_value <= res.value + armijo * step * slope && trial_value < res.value;
      // near the optimum value differences drown in roundoff; progress is judged by the gradient
      const bool flat = trial_value <= ceiling &&
                        trial_grad.lpNorm<Eigen::Infinity>() < grad_norm;
      if (sufficient || flat) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (scaled || !res.inverse_hessian.isIdentity()) {
        // retry once along steepest descent before giving up
        res.inverse_hessian.setIdentity();
        scaled = false;
        continue;
      }
      return res;
    }

    const Eigen::VectorXd s = trial - res.x;
    const Eigen::VectorXd y = trial_grad - res.gradient;
    res.x = trial;
    res.value = trial_value;
    res.gradient = trial_grad;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        res.inverse_hessian = Eigen::MatrixXd::Identity(p, p) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = res.inverse_hessian * y;
      res.inverse_hessian += ((1.0 + rho * y.dot(hy)) * rho) * (s * s.transpose()) -
                             rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
  res.converged = res.gradient.lpNorm<Eigen::Infinity>() <= options.gradient_tol;
  return res;
}

Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double step = h * std::max(1.0, std::abs(x[k]));
    probe[k] = x[k] + step;
    const double up = f(probe, nullptr);
    probe[k] = x[k] - step;
    const double down = f(probe, nullptr);
    probe[k] = x[k];
    g[k] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace jointmix
