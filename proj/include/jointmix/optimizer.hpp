#pragma once

#include <Eigen/Core>

#include <functional>

namespace jointmix {

// Objective to minimize. Writes the gradient when the pointer is non-null and
// returns the value; may return a non-finite value outside its domain.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct QuasiNewtonOptions {
  double gradient_tol = 1e-6;  // sup-norm
  int max_iter = 200;
  double max_step = 2.0;       // sup-norm cap on a single trial step
};

struct QuasiNewtonResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd inverse_hessian;
  int iterations = 0;
  bool converged = false;
};

// BFGS with backtracking Armijo line search. Once value differences reach
// roundoff, a step that shrinks the gradient is also accepted; the returned
// value never exceeds f(x0) + 1e-14 |f(x0)|.
// initial_inverse_hessian, when given and of matching size, seeds the update.
QuasiNewtonResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                                const QuasiNewtonOptions& options,
                                const Eigen::MatrixXd* initial_inverse_hessian = nullptr);

// Central-difference gradient, step h * max(1, |x_k|).
Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double h);

}  // namespace jointmix
