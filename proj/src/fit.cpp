#include "fpcav/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fpcav {

double FitResult::value(const std::string& name) const {
  for (const FitParam& p : params) {
    if (p.name == name) return p.value;
  }
  throw Error("FitResult: no parameter named '" + name + "' in model '" + model + "'");
}

double FitResult::sigma(const std::string& name) const {
  for (const FitParam& p : params) {
    if (p.name == name) return p.sigma;
  }
  throw Error("FitResult: no parameter named '" + name + "' in model '" + model + "'");
}

bool FitResult::has(const std::string& name) const {
  return std::any_of(params.begin(), params.end(),
                     [&](const FitParam& p) { return p.name == name; });
}

namespace {

Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& p,
                                 Eigen::Index n_residuals, const Eigen::VectorXd& step_scale) {
  const Eigen::Index np = p.size();
  Eigen::MatrixXd jac(n_residuals, np);
  Eigen::VectorXd probe = p;
  for (Eigen::Index j = 0; j < np; ++j) {
    const double h = step_scale.size() == np ? step_scale[j]
                                             : 1e-6 * std::max(std::abs(p[j]), 1e-3);
    probe[j] = p[j] + h;
    const Eigen::VectorXd fp = f(probe);
    probe[j] = p[j] - h;
    const Eigen::VectorXd fm = f(probe);
    probe[j] = p[j];
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

}  // namespace

LeastSquaresResult fit_least_squares(const ResidualFn& residuals, const Eigen::VectorXd& initial,
                                     const LeastSquaresOptions& options) {
  LeastSquaresResult out;
  Eigen::VectorXd p = initial;
  Eigen::VectorXd r = residuals(p);
  if (!r.allFinite()) throw NumericalError("fit: residuals not finite at the initial guess");
  double cost = 0.5 * r.squaredNorm();
  double damping = options.initial_damping;

  const double cost0 = cost;
  int iter = 0;
  bool converged = false;
  Eigen::MatrixXd jac;
  for (; iter < options.max_iterations; ++iter) {
    jac = numeric_jacobian(residuals, p, r.size(), options.step_scale);
    const Eigen::MatrixXd hess = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;

    if (grad.lpNorm<Eigen::Infinity>() < 1e-14 * std::max(1.0, cost)) {
      converged = true;
      break;
    }

    bool stepped = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::MatrixXd damped = hess;
      for (Eigen::Index k = 0; k < damped.rows(); ++k) {
        damped(k, k) += damping * std::max(hess(k, k), 1e-12);
      }
      const Eigen::VectorXd step = damped.ldlt().solve(-grad);
      if (!step.allFinite()) {
        damping *= 4.0;
        continue;
      }
      const Eigen::VectorXd p_try = p + step;
      const Eigen::VectorXd r_try = residuals(p_try);
      const double cost_try = r_try.allFinite() ? 0.5 * r_try.squaredNorm()
                                                : std::numeric_limits<double>::infinity();
      if (cost_try < cost) {
        const double improvement = (cost - cost_try) / std::max(cost, 1e-300);
        p = p_try;
        r = r_try;
        cost = cost_try;
        damping = std::max(damping / 3.0, 1e-14);
        stepped = true;
        if (improvement < options.rel_tolerance || cost == 0.0) converged = true;
        break;
      }
      damping *= 4.0;
    }
    if (!stepped) {
      // No downhill step at any damping. Accept the point as converged when
      // the remaining predicted Gauss-Newton decrease is negligible against
      // the current cost, or the cost has already collapsed relative to the
      // start (residuals at their numerical floor).
      Eigen::MatrixXd reg = hess;
      for (Eigen::Index k = 0; k < reg.rows(); ++k) {
        reg(k, k) += 1e-8 * std::max(hess(k, k), 1e-12);
      }
      const Eigen::VectorXd newton = reg.ldlt().solve(-grad);
      const double predicted_drop = newton.allFinite() ? -0.5 * grad.dot(newton) : 0.0;
      converged = predicted_drop <= options.rel_tolerance * std::max(cost, 1e-300) ||
                  cost < 1e-10 * std::max(cost0, 1e-300);
      break;
    }
    if (converged) break;
  }

  jac = numeric_jacobian(residuals, p, r.size(), options.step_scale);
  const Eigen::MatrixXd hess = jac.transpose() * jac;
  const Eigen::Index n = r.size();
  const Eigen::Index np = p.size();
  const double dof = static_cast<double>(std::max<Eigen::Index>(n - np, 1));
  const double variance = r.squaredNorm() / dof;

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(hess);
  out.identifiable = cod.rank() == np;
  out.covariance = variance * cod.pseudoInverse();
  out.sigma.resize(np);
  for (Eigen::Index k = 0; k < np; ++k) {
    const double v = out.covariance(k, k);
    out.sigma[k] = out.identifiable ? std::sqrt(std::max(v, 0.0))
                                    : std::numeric_limits<double>::infinity();
  }

  out.params = p;
  out.cost = cost;
  out.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(n));
  out.converged = converged;
  out.iterations = iter;
  if (!converged && out.message.empty()) {
    out.message = "no convergence within " + std::to_string(options.max_iterations) +
                  " iterations";
  }
  return out;
}

}  // namespace fpcav
