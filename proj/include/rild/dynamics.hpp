#pragma once

#include <Eigen/Core>

#include "rild/core.hpp"

namespace rild {

// Preconditioner for drift and noise. Either the identity (no matrix stored)
// or a covariance C with a factor satisfying factor * factor^T == C. The
// factor turns an independent standard normal vector eta into a draw
// factor * eta from N(0, C).
struct Preconditioner {
  bool is_identity = true;
  Eigen::MatrixXd matrix;  // d x d when not identity
  Eigen::MatrixXd factor;  // d x r when not identity

  static Preconditioner identity() { return Preconditioner{}; }
  static Preconditioner from_covariance(WeightedCovariance c);

  // matrix * v, or v unchanged (no copy arithmetic) for the identity.
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

  // Length of the noise vector a step consumes: d for the identity,
  // otherwise the number of factor columns.
  Eigen::Index noise_dimension(Eigen::Index d) const;
};

// Inputs shared by every particle within one step.
struct StepInputs {
  Preconditioner preconditioner;
  double tau = 0.0;
  double sigma = 0.0;

  // Checks tau > 0, sigma >= 0, and factor * factor^T == matrix within 1e-10.
  void validate() const;
};

// One Euler-Maruyama update: x - drift * tau + sqrt(tau sigma^2) * factor * noise
// (the identity preconditioner uses the noise vector directly). Throws
// DivergenceError when the result is non-finite.
Eigen::VectorXd langevin_step(const Eigen::VectorXd& x, const Eigen::VectorXd& drift,
                              const StepInputs& s, const Eigen::VectorXd& noise);

// Preconditioned gradient drift C * grad V(x_i) for particle i (grad V(x_i)
// verbatim for the identity). ConfigError when the problem lacks a gradient.
Eigen::VectorXd exact_preconditioned_drift(const Ensemble& e, int i,
                                           const ObjectiveProblem& problem,
                                           const Preconditioner& pre);

// Gradient-free drift for particle i built from forward-map values alone:
//   sum_j w_j <G(x_j) - Gbar, G(x_i) - y>_gamma x_j  +  C gamma0^{-1} x_i,
// with Gbar = sum_k w_k G(x_k) and <a, b>_gamma = a^T gamma^{-1} b. Exact
// for affine forward maps (equals C grad V then). g_values holds G(x_j) as
// columns (k x N).
Eigen::VectorXd derivative_free_drift(const Ensemble& e, const Eigen::MatrixXd& g_values, int i,
                                      const LeastSquaresProblem& problem,
                                      const Preconditioner& pre);

// All-particle version of derivative_free_drift (one column per particle),
// evaluated with dense matrix products. include_prior_term = false drops the
// C gamma0^{-1} x_i contribution (used by the misfit-only ensemble iteration).
Eigen::MatrixXd derivative_free_drift_all(const Ensemble& e, const Eigen::MatrixXd& g_values,
                                          const LeastSquaresProblem& problem,
                                          const Preconditioner& pre,
                                          bool include_prior_term = true);

// Normalized-drift step control: tau0 / (|drifts|_F / sqrt(N) + 1e-8),
// clamped to [1e-6 tau0, 10 tau0]. drifts holds one column per particle.
double adaptive_timestep(const Eigen::MatrixXd& drifts, double tau0);

}  // namespace rild
