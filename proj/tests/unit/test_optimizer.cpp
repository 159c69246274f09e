#include "jointmix/optimizer.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>

#include <cmath>

using namespace jointmix;

namespace {

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
  const double a = 1.0 - x[0];
  const double b = x[1] - x[0] * x[0];
  if (grad) {
    grad->resize(2);
    (*grad)[0] = -2.0 * a - 400.0 * x[0] * b;
    (*grad)[1] = 200.0 * b;
  }
  return a * a + 100.0 * b * b;
}

}  // namespace

TEST_CASE("BFGS solves a convex quadratic") {
  Eigen::Matrix3d A;
  A << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const Eigen::Vector3d c(1.0, -2.0, 0.5);
  const Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = A * x - c;
    return 0.5 * x.dot(A * x) - c.dot(x);
  };
  const QuasiNewtonResult res = minimize_bfgs(f, Eigen::Vector3d::Zero(), {1e-10, 200, 2.0});
  CHECK(res.converged);
  const Eigen::Vector3d exact = A.ldlt().solve(c);
  CHECK((res.x - exact).cwiseAbs().maxCoeff() < 1e-8);
  // the inverse Hessian approximation stays positive definite
  CHECK(res.inverse_hessian.llt().info() == Eigen::Success);
}

TEST_CASE("BFGS minimizes Rosenbrock without increasing the objective") {
  const Eigen::Vector2d x0(-1.2, 1.0);
  const QuasiNewtonResult res = minimize_bfgs(rosenbrock, x0, {1e-8, 500, 2.0});
  CHECK(res.converged);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.value <= rosenbrock(x0, nullptr));
}

TEST_CASE("iteration cap reports non-convergence with a lower value") {
  const Eigen::Vector2d x0(-1.2, 1.0);
  const QuasiNewtonResult res = minimize_bfgs(rosenbrock, x0, {1e-12, 3, 2.0});
  CHECK_FALSE(res.converged);
  CHECK(res.iterations <= 3);
  CHECK(res.value < rosenbrock(x0, nullptr));
}

TEST_CASE("non-finite regions are avoided by the line search") {
  // log barrier: undefined for x <= 0
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (x[0] <= 0.0) return std::numeric_limits<double>::infinity();
    if (g) *g = Eigen::VectorXd::Constant(1, 1.0 - 1.0 / x[0]);
    return x[0] - std::log(x[0]);
  };
  const QuasiNewtonResult res = minimize_bfgs(f, Eigen::VectorXd::Constant(1, 3.0), {1e-10, 100, 2.0});
  CHECK(res.converged);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("numeric gradient matches the analytic gradient") {
  const Eigen::Vector2d x(0.3, -0.7);
  Eigen::VectorXd g;
  rosenbrock(x, &g);
  const Eigen::VectorXd fd = numeric_gradient(rosenbrock, x, 1e-5);
  CHECK((fd - g).cwiseAbs().maxCoeff() < 1e-5);
}
