#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace jointmix {

// Malformed input: bad files, invalid parameters, out-of-range indices.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown that is not the caller's fault.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyRiskSet : public NumericError {
 public:
  explicit EmptyRiskSet(double t)
      : NumericError("empty risk set at t = " + std::to_string(t)), time(t) {}
  double time;
};

class InvalidHazard : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingularInformation : public NumericError {
 public:
  SingularInformation(const std::string& what, Eigen::VectorXd null_direction)
      : NumericError(what), null_direction(std::move(null_direction)) {}
  Eigen::VectorXd null_direction;
};

class OptimizerFailure : public NumericError {
 public:
  OptimizerFailure(const std::string& what, Eigen::VectorXd best_point)
      : NumericError(what), best_point(std::move(best_point)) {}
  Eigen::VectorXd best_point;
};

}  // namespace jointmix
