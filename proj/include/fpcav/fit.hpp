#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fpcav/errors.hpp"

namespace fpcav {

/// One named fitted parameter with its 1-sigma uncertainty.
struct FitParam {
  std::string name;
  double value = 0.0;
  double sigma = 0.0;
};

/// Result record shared by every fitting operation in the toolkit.
struct FitResult {
  std::string model;
  std::vector<FitParam> params;
  double residual_rms = 0.0;
  bool converged = false;
  int n_iterations = 0;
  std::string message;
  std::vector<std::pair<double, double>> exclusion_windows;
  std::uint64_t seed = 0;  // metadata: generator seed for synthetic inputs

  double value(const std::string& name) const;
  double sigma(const std::string& name) const;
  bool has(const std::string& name) const;
};

struct LeastSquaresOptions {
  int max_iterations = 500;
  double rel_tolerance = 1e-10;
  double initial_damping = 1e-3;
  /// Absolute finite-difference steps per parameter. Empty means the default
  /// relative heuristic; set it when a parameter legitimately starts at 0 or
  /// when the residuals carry evaluation noise the heuristic step would
  /// amplify.
  Eigen::VectorXd step_scale;
};

/// Raw output of the damped least-squares driver.
struct LeastSquaresResult {
  Eigen::VectorXd params;
  Eigen::VectorXd sigma;           // 1-sigma from curvature, scaled by residual variance
  Eigen::MatrixXd covariance;
  double residual_rms = 0.0;
  double cost = 0.0;               // 0.5 * sum of squared residuals
  bool converged = false;
  int iterations = 0;
  bool identifiable = true;        // false when J^T J is rank deficient at the optimum
  std::string message;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Levenberg-Marquardt style damped least squares with a central-difference
/// Jacobian. Minimizes 0.5 * |f(p)|^2 starting from `initial`.
LeastSquaresResult fit_least_squares(const ResidualFn& residuals, const Eigen::VectorXd& initial,
                                     const LeastSquaresOptions& options = {});

}  // namespace fpcav
