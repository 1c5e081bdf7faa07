#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <numbers>
#include <stdexcept>
#include <string>

namespace taperom {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;
using SpMat = Eigen::SparseMatrix<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kMu0 = 4.0 * kPi * 1e-7;  // H/m

// Invalid user-supplied dimensions, ranges or option values.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& msg) : std::domain_error(msg) {}
};

// A time step failed to converge or its linear system was singular.
class StepFailure : public std::runtime_error {
 public:
  StepFailure(const std::string& msg, int step, double residual)
      : std::runtime_error(msg), step_index(step), last_residual(residual) {}
  int step_index;
  double last_residual;
};

// A required upstream artifact is missing; names the command that produces it.
class DependencyError : public std::runtime_error {
 public:
  DependencyError(const std::string& what_missing, const std::string& producer)
      : std::runtime_error("missing artifact: " + what_missing +
                           " (produce with `" + producer + "`)"),
        missing(what_missing),
        producer_command(producer) {}
  std::string missing;
  std::string producer_command;
};

}  // namespace taperom
