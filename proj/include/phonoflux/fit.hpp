#pragma once

// Nonlinear least squares (Levenberg-Marquardt) and weighted linear
// regression, both reporting covariance and simultaneous standard errors.

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "phonoflux/core.hpp"

namespace phonoflux {

/// Model evaluated on the whole abscissa vector at once.
using VectorModel = std::function<RealVector(const RealVector& params, const RealVector& x)>;
using JacobianModel = std::function<RealMatrix(const RealVector& params, const RealVector& x)>;

struct FitProblem {
  VectorModel model;
  RealVector x;
  RealVector y;
  RealVector sigma;  ///< empty means unit weights
  RealVector initial;
  RealVector lower;  ///< empty means unbounded; lower == upper pins a parameter
  RealVector upper;
  JacobianModel jacobian;  ///< optional analytic override (d model / d params)
  int max_iterations = 200;
  /// When false the covariance is scaled by the reduced chi-square.
  bool absolute_sigma = false;
};

struct FitOutcome {
  RealVector params;
  RealMatrix covariance;
  RealVector std_errors;
  double residual_rms = 0.0;  ///< rms of (model - y), unweighted
  double cost = 0.0;          ///< 0.5 * sum of squared weighted residuals
  double reduced_chi2 = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string message;
  std::vector<double> cost_history;  ///< cost after each accepted step
};

FitOutcome least_squares(const FitProblem& problem);

/// Central-difference Jacobian of the model with step max(1e-8, 1e-6 |p|).
RealMatrix finite_difference_jacobian(const FitProblem& problem, const RealVector& params);

/// Straight line y = params[0] + params[1] * x.  With sigma given the
/// covariance is absolute; without it, scaled by the residual variance.
FitOutcome weighted_linear_fit(const RealVector& x, const RealVector& y,
                               const RealVector& sigma = RealVector());

}  // namespace phonoflux
