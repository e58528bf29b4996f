#include "phonoflux/fit.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace phonoflux {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Prepared {
  const FitProblem& problem;
  RealVector lower;
  RealVector upper;
  RealVector weight;            // 1 / sigma
  std::vector<int> free_index;  // parameters actually optimized
};

Prepared prepare(const FitProblem& problem) {
  const Eigen::Index n_par = problem.initial.size();
  const Eigen::Index n_data = problem.y.size();
  if (n_par == 0) throw ValidationError("least_squares: no parameters");
  if (n_data == 0) throw ValidationError("least_squares: no data");
  if (problem.x.size() != n_data) throw ValidationError("least_squares: x and y sizes differ");
  if (!problem.model) throw ValidationError("least_squares: model not set");

  Prepared p{problem, problem.lower, problem.upper, RealVector::Ones(n_data), {}};
  if (p.lower.size() == 0) p.lower = RealVector::Constant(n_par, -kInf);
  if (p.upper.size() == 0) p.upper = RealVector::Constant(n_par, kInf);
  if (p.lower.size() != n_par || p.upper.size() != n_par) {
    throw ValidationError("least_squares: bounds size mismatch");
  }
  for (Eigen::Index i = 0; i < n_par; ++i) {
    if (p.lower(i) > p.upper(i)) throw ValidationError("least_squares: inconsistent bounds");
    if (problem.initial(i) < p.lower(i) || problem.initial(i) > p.upper(i)) {
      throw ValidationError("least_squares: initial parameter outside bounds");
    }
    if (p.lower(i) != p.upper(i)) p.free_index.push_back(static_cast<int>(i));
  }
  if (problem.sigma.size() != 0) {
    if (problem.sigma.size() != n_data) throw ValidationError("least_squares: sigma size mismatch");
    for (Eigen::Index i = 0; i < n_data; ++i) {
      if (!(problem.sigma(i) > 0)) throw ValidationError("least_squares: sigma must be positive");
      p.weight(i) = 1.0 / problem.sigma(i);
    }
  }
  return p;
}

RealVector residual(const Prepared& p, const RealVector& params) {
  const RealVector model = p.problem.model(params, p.problem.x);
  if (model.size() != p.problem.y.size()) {
    throw ValidationError("least_squares: model returned wrong length");
  }
  return (model - p.problem.y).cwiseProduct(p.weight);
}

double half_sum_squares(const RealVector& r) { return 0.5 * r.squaredNorm(); }

bool all_finite(const RealVector& v) { return v.allFinite(); }

RealMatrix model_jacobian_fd(const FitProblem& problem, const RealVector& lower,
                             const RealVector& upper, const RealVector& params,
                             const std::vector<int>& columns) {
  RealMatrix jac;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const int i = columns[c];
    const double h = std::max(1e-8, 1e-6 * std::abs(params(i)));
    RealVector plus = params;
    RealVector minus = params;
    double up = params(i) + h;
    double down = params(i) - h;
    if (up > upper(i)) up = params(i);
    if (down < lower(i)) down = params(i);
    plus(i) = up;
    minus(i) = down;
    const RealVector diff = (problem.model(plus, problem.x) - problem.model(minus, problem.x)) / (up - down);
    if (c == 0) jac.resize(diff.size(), static_cast<Eigen::Index>(columns.size()));
    jac.col(static_cast<Eigen::Index>(c)) = diff;
  }
  return jac;
}

RealMatrix weighted_jacobian(const Prepared& p, const RealVector& params) {
  RealMatrix jac;
  if (p.problem.jacobian) {
    const RealMatrix full = p.problem.jacobian(params, p.problem.x);
    jac.resize(full.rows(), static_cast<Eigen::Index>(p.free_index.size()));
    for (std::size_t c = 0; c < p.free_index.size(); ++c) {
      jac.col(static_cast<Eigen::Index>(c)) = full.col(p.free_index[c]);
    }
  } else {
    jac = model_jacobian_fd(p.problem, p.lower, p.upper, params, p.free_index);
  }
  return p.weight.asDiagonal() * jac;
}

RealVector clamp(const Prepared& p, RealVector params) {
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    params(i) = std::clamp(params(i), p.lower(i), p.upper(i));
  }
  return params;
}

}  // namespace

RealMatrix finite_difference_jacobian(const FitProblem& problem, const RealVector& params) {
  std::vector<int> all(static_cast<std::size_t>(params.size()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  const RealVector lo = problem.lower.size() ? problem.lower : RealVector::Constant(params.size(), -kInf);
  const RealVector hi = problem.upper.size() ? problem.upper : RealVector::Constant(params.size(), kInf);
  return model_jacobian_fd(problem, lo, hi, params, all);
}

FitOutcome least_squares(const FitProblem& problem) {
  const Prepared prep = prepare(problem);
  const Eigen::Index n_data = problem.y.size();
  const Eigen::Index n_free = static_cast<Eigen::Index>(prep.free_index.size());

  FitOutcome out;
  out.params = problem.initial;
  RealVector r = residual(prep, out.params);
  if (!all_finite(r)) throw DomainError("least_squares: model not finite at initial parameters");
  out.cost = half_sum_squares(r);

  bool converged = n_free == 0;
  double lambda = -1.0;
  double nu = 2.0;
  RealVector scale = RealVector::Zero(n_free);
  int iter = 0;
  std::string message = n_free == 0 ? "all parameters pinned" : "iteration cap reached";

  // Levenberg-Marquardt with Nielsen's damping update and the running
  // maximum of diag(J^T J) as scaling.
  while (!converged && iter < problem.max_iterations) {
    ++iter;
    const RealMatrix jac = weighted_jacobian(prep, out.params);
    const RealVector grad = jac.transpose() * r;
    const RealMatrix normal = jac.transpose() * jac;
    if (grad.cwiseAbs().maxCoeff() < 1e-10 || out.cost < 1e-300) {
      converged = true;
      message = "gradient below tolerance";
      break;
    }
    scale = scale.cwiseMax(normal.diagonal()).cwiseMax(1e-300);
    if (lambda < 0) lambda = 1e-3;

    bool accepted = false;
    while (!accepted) {
      RealMatrix damped = normal;
      damped.diagonal() += lambda * scale;
      // Parameters resting on a bound with the descent direction pointing
      // outward are held for this step.
      RealVector rhs = -grad;
      for (Eigen::Index c = 0; c < n_free; ++c) {
        const int i = prep.free_index[c];
        const bool at_lo = out.params(i) <= prep.lower(i) && grad(c) > 0;
        const bool at_hi = out.params(i) >= prep.upper(i) && grad(c) < 0;
        if (at_lo || at_hi) {
          damped.row(c).setZero();
          damped.col(c).setZero();
          damped(c, c) = 1.0;
          rhs(c) = 0.0;
        }
      }
      const RealVector step = damped.ldlt().solve(rhs);
      RealVector candidate = out.params;
      for (Eigen::Index c = 0; c < n_free; ++c) candidate(prep.free_index[c]) += step(c);
      candidate = clamp(prep, candidate);
      RealVector taken(n_free);
      for (Eigen::Index c = 0; c < n_free; ++c) {
        taken(c) = candidate(prep.free_index[c]) - out.params(prep.free_index[c]);
      }
      const RealVector r_new = residual(prep, candidate);
      const double cost_new = all_finite(r_new) ? half_sum_squares(r_new) : kInf;
      // Gain ratio against the linear model for the step actually taken.
      const double predicted = -(grad.dot(taken) + 0.5 * (jac * taken).squaredNorm());
      if (cost_new <= out.cost && std::isfinite(cost_new) && step.allFinite()) {
        const double rel = (out.cost - cost_new) / std::max(out.cost, 1e-300);
        const double step_size = (candidate - out.params).norm();
        const double rho = predicted > 0 ? (out.cost - cost_new) / predicted : 0.0;
        out.params = candidate;
        r = r_new;
        out.cost = cost_new;
        out.cost_history.push_back(cost_new);
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        lambda = std::max(lambda, 1e-15);
        nu = 2.0;
        accepted = true;
        if (rel < 1e-10) {
          converged = true;
          message = "relative cost change below tolerance";
        } else if (step_size <= 1e-14 * (out.params.norm() + 1e-14)) {
          converged = true;
          message = "step below tolerance";
        }
      } else {
        lambda *= nu;
        nu *= 2.0;
        if (lambda > 1e16 || !std::isfinite(lambda)) {
          // No descent direction left at working precision.
          converged = true;
          message = "no further decrease possible";
          break;
        }
      }
    }
  }
  out.iterations = iter;

  const Eigen::Index n_par = out.params.size();
  out.covariance = RealMatrix::Zero(n_par, n_par);
  out.std_errors = RealVector::Zero(n_par);
  const RealVector raw = problem.model(out.params, problem.x) - problem.y;
  out.residual_rms = std::sqrt(raw.squaredNorm() / static_cast<double>(n_data));
  const Eigen::Index dof = n_data - n_free;
  out.reduced_chi2 = dof > 0 ? 2.0 * out.cost / static_cast<double>(dof) : 0.0;

  if (n_free > 0) {
    const RealMatrix jac = weighted_jacobian(prep, out.params);
    const RealMatrix normal = jac.transpose() * jac;
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(normal);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    const double bottom = es.eigenvalues().minCoeff();
    if (!(top > 0.0) || bottom <= 1e-13 * top) {
      converged = false;
      message = "normal matrix singular: parameters not identifiable";
      for (Eigen::Index c = 0; c < n_free; ++c) {
        out.covariance(prep.free_index[c], prep.free_index[c]) = kInf;
        out.std_errors(prep.free_index[c]) = kInf;
      }
    } else {
      RealMatrix inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                       es.eigenvectors().transpose();
      const double s2 = problem.absolute_sigma ? 1.0 : (dof > 0 ? out.reduced_chi2 : 1.0);
      inv *= s2;
      for (Eigen::Index a = 0; a < n_free; ++a) {
        for (Eigen::Index b = 0; b < n_free; ++b) {
          out.covariance(prep.free_index[a], prep.free_index[b]) = inv(a, b);
        }
        out.std_errors(prep.free_index[a]) = std::sqrt(std::max(inv(a, a), 0.0));
      }
    }
  }
  out.converged = converged;
  out.message = message;
  return out;
}

FitOutcome weighted_linear_fit(const RealVector& x, const RealVector& y, const RealVector& sigma) {
  const Eigen::Index n = x.size();
  if (n < 2 || y.size() != n) throw ValidationError("weighted_linear_fit: need >= 2 paired points");
  const bool weighted = sigma.size() != 0;
  if (weighted && sigma.size() != n) throw ValidationError("weighted_linear_fit: sigma size mismatch");

  double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double w = 1.0;
    if (weighted) {
      if (!(sigma(i) > 0)) throw ValidationError("weighted_linear_fit: sigma must be positive");
      w = 1.0 / (sigma(i) * sigma(i));
    }
    s += w;
    sx += w * x(i);
    sy += w * y(i);
    sxx += w * x(i) * x(i);
    sxy += w * x(i) * y(i);
  }
  // Centered determinant avoids cancellation for clustered abscissae.
  const double xbar = sx / s;
  double sxx_c = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weighted ? 1.0 / (sigma(i) * sigma(i)) : 1.0;
    sxx_c += w * (x(i) - xbar) * (x(i) - xbar);
  }
  if (!(sxx_c > 1e-14 * std::max(sxx, 1e-300))) {
    throw ValidationError("weighted_linear_fit: singular design (x values not distinct)");
  }
  const double slope = (sxy - sx * sy / s) / sxx_c;
  const double intercept = (sy - slope * sx) / s;

  FitOutcome out;
  out.params = RealVector(2);
  out.params << intercept, slope;
  out.covariance = RealMatrix(2, 2);
  out.covariance << sxx / (s * sxx_c), -xbar / sxx_c, -xbar / sxx_c, 1.0 / sxx_c;

  double chi2 = 0.0, raw2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double res = y(i) - intercept - slope * x(i);
    raw2 += res * res;
    chi2 += weighted ? res * res / (sigma(i) * sigma(i)) : res * res;
  }
  out.residual_rms = std::sqrt(raw2 / static_cast<double>(n));
  out.cost = 0.5 * chi2;
  out.reduced_chi2 = n > 2 ? chi2 / static_cast<double>(n - 2) : 0.0;
  if (!weighted) out.covariance *= n > 2 ? out.reduced_chi2 : 0.0;
  out.std_errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.converged = true;
  out.message = "closed form";
  return out;
}

}  // namespace phonoflux
