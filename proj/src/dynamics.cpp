#include "rild/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace rild {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Preconditioner Preconditioner::from_covariance(WeightedCovariance c) {
  Preconditioner p;
  p.is_identity = false;
  p.matrix = std::move(c.matrix);
  p.factor = std::move(c.factor);
  return p;
}

VectorXd Preconditioner::apply(const VectorXd& v) const {
  if (is_identity) return v;
  if (matrix.cols() != v.size()) throw ShapeError("preconditioner dimension mismatch");
  return matrix * v;
}

Eigen::Index Preconditioner::noise_dimension(Eigen::Index d) const {
  return is_identity ? d : factor.cols();
}

void StepInputs::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("step requires tau > 0");
  if (sigma < 0.0 || !std::isfinite(sigma)) throw ConfigError("step requires sigma >= 0");
  if (!preconditioner.is_identity) {
    if (preconditioner.matrix.rows() != preconditioner.matrix.cols())
      throw ShapeError("preconditioner matrix must be square");
    if (preconditioner.factor.rows() != preconditioner.matrix.rows())
      throw ShapeError("preconditioner factor row count mismatch");
    const MatrixXd product = preconditioner.factor * preconditioner.factor.transpose();
    const double scale = std::max(1.0, preconditioner.matrix.cwiseAbs().maxCoeff());
    if ((product - preconditioner.matrix).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw NumericalError("preconditioner factor does not reproduce its matrix");
  }
}

VectorXd langevin_step(const VectorXd& x, const VectorXd& drift, const StepInputs& s,
                       const VectorXd& noise) {
  if (drift.size() != x.size()) throw ShapeError("drift dimension does not match position");
  if (noise.size() != s.preconditioner.noise_dimension(x.size()))
    throw ShapeError("noise dimension does not match preconditioner");
  VectorXd out = x - s.tau * drift;
  if (s.sigma > 0.0) {
    const double amplitude = std::sqrt(s.tau * s.sigma * s.sigma);
    if (s.preconditioner.is_identity)
      out += amplitude * noise;
    else
      out += amplitude * (s.preconditioner.factor * noise);
  }
  if (!out.allFinite())
    throw DivergenceError("particle position became non-finite during a step");
  return out;
}

VectorXd exact_preconditioned_drift(const Ensemble& e, int i, const ObjectiveProblem& problem,
                                    const Preconditioner& pre) {
  if (i < 0 || i >= e.size()) throw ShapeError("particle index out of range");
  if (e.dimension() != problem.dimension)
    throw ShapeError("ensemble dimension does not match problem");
  const VectorXd grad = problem.evaluate_gradient(e.positions().col(i));
  return pre.apply(grad);
}

VectorXd derivative_free_drift(const Ensemble& e, const MatrixXd& g_values, int i,
                               const LeastSquaresProblem& problem, const Preconditioner& pre) {
  if (i < 0 || i >= e.size()) throw ShapeError("particle index out of range");
  if (g_values.rows() != problem.observation_dim() || g_values.cols() != e.size())
    throw ShapeError("forward-map values do not match ensemble/problem shapes");
  const VectorXd& w = e.weights();
  const VectorXd gbar = g_values * w;
  const VectorXd gamma_residual = problem.apply_gamma_inverse(
      VectorXd(g_values.col(i) - problem.data()));
  VectorXd drift = VectorXd::Zero(e.dimension());
  for (int j = 0; j < e.size(); ++j) {
    const double coupling = (g_values.col(j) - gbar).dot(gamma_residual);
    drift += w(j) * coupling * e.positions().col(j);
  }
  const VectorXd prior = problem.apply_gamma0_inverse(VectorXd(e.positions().col(i)));
  drift += pre.apply(prior);
  return drift;
}

MatrixXd derivative_free_drift_all(const Ensemble& e, const MatrixXd& g_values,
                                   const LeastSquaresProblem& problem, const Preconditioner& pre,
                                   bool include_prior_term) {
  if (g_values.rows() != problem.observation_dim() || g_values.cols() != e.size())
    throw ShapeError("forward-map values do not match ensemble/problem shapes");
  const VectorXd& w = e.weights();
  const VectorXd gbar = g_values * w;
  const MatrixXd centered = g_values.colwise() - gbar;
  const MatrixXd residual = g_values.colwise() - problem.data();
  // coupling(j, i) = <G(x_j) - Gbar, G(x_i) - y>_gamma
  const MatrixXd coupling = centered.transpose() * problem.apply_gamma_inverse(residual);
  MatrixXd drift = (e.positions() * w.asDiagonal()) * coupling;
  if (include_prior_term) {
    const MatrixXd prior = problem.apply_gamma0_inverse(e.positions());
    drift += pre.is_identity ? prior : MatrixXd(pre.matrix * prior);
  }
  return drift;
}

double adaptive_timestep(const MatrixXd& drifts, double tau0) {
  if (!(tau0 > 0.0) || !std::isfinite(tau0))
    throw ConfigError("adaptive step requires tau0 > 0");
  if (drifts.size() == 0) throw ShapeError("adaptive step requires a nonempty drift matrix");
  const double scale = drifts.norm() / std::sqrt(static_cast<double>(drifts.cols()));
  const double tau = tau0 / (scale + 1e-8);
  return std::clamp(tau, 1e-6 * tau0, 10.0 * tau0);
}

}  // namespace rild
