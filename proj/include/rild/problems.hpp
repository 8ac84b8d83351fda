#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "rild/core.hpp"

namespace rild {

// Ackley potential on R^d:
//   V(x) = -a exp(-b sqrt(mean x_i^2)) - exp(mean cos(c x_i)) + a + e.
// Nonnegative, zero only at the origin. The radial gradient term has a
// removable singularity at the origin; it is defined as zero when the radial
// mean falls below 1e-12.
ObjectiveProblem ackley_problem(int dimension, double a = 20.0, double b = 0.2,
                                double c = 2.0 * M_PI);

// Two-point boundary observation of the scalar elliptic two-point problem
//   -(d/du) (exp(x_1) d/du f) = 1 on (0, 1),  f(0) = 0, f(1) = x_2,
// whose solution is f(u) = x_1 u + exp(-x_2) (u - u^2) / 2 up to the
// parametrization used here: G(x) = (f(0.25), f(0.75)) with
//   f(u) = x_1 u + exp(-x_2) (-u^2/2 + u/2).
// Data y = (27.5, 79.7), noise covariance 0.1^2 I, prior covariance 10^2 I.
LeastSquaresProblem elliptic_bvp_problem();

// Rosenbrock forward map G: R^d -> R^(2d-2),
//   G(x) = (10 (x_2 - x_1^2), ..., 10 (x_d - x_{d-1}^2), x_1, ..., x_{d-1}),
// with data y = (0, ..., 0, 1, ..., 1), so |G(x) - y|^2 is the classic
// Rosenbrock function sum_i [100 (x_{i+1} - x_i^2)^2 + (x_i - 1)^2].
// Noise covariance 0.1^2 I, prior covariance 10^2 I.
LeastSquaresProblem rosenbrock_map_problem(int dimension);

// Affine forward map G(x) = A x + b, for which the gradient-free ensemble
// drift is exact. Used as a reference problem in tests.
LeastSquaresProblem affine_problem(Eigen::MatrixXd a, Eigen::VectorXd b, Eigen::VectorXd y,
                                   Eigen::MatrixXd gamma, Eigen::MatrixXd gamma0);

// Independent Gaussian ensemble: every coordinate of every particle drawn
// from N(mean, std^2). Draws come from a dedicated stream derived from seed.
Ensemble gaussian_ensemble(int dimension, int count, double mean, double stddev,
                           std::uint64_t seed);

// Default initial ensemble for a named problem:
//   ackley      N(0, 30^2 I)
//   rosenbrock  N(2, 0.3^2 I)
//   elliptic    x_1 ~ N(0, 1), x_2 ~ U(90, 110)
// mean/std overrides apply to the Gaussian families only.
Ensemble default_initial_ensemble(const std::string& problem_name, int dimension, int count,
                                  std::uint64_t seed,
                                  std::optional<double> mean_override = std::nullopt,
                                  std::optional<double> std_override = std::nullopt);

}  // namespace rild
