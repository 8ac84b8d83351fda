#include "rild/problems.hpp"

#include <cmath>

#include "rild/rng.hpp"

namespace rild {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ObjectiveProblem ackley_problem(int dimension, double a, double b, double c) {
  if (dimension < 1) throw ShapeError("ackley dimension must be positive");
  ObjectiveProblem p;
  p.dimension = dimension;
  const double d = static_cast<double>(dimension);
  p.value = [a, b, c, d](const VectorXd& x) {
    const double radial = std::sqrt(x.squaredNorm() / d);
    const double cosine = (c * x.array()).cos().mean();
    return -a * std::exp(-b * radial) - std::exp(cosine) + a + std::exp(1.0);
  };
  p.gradient = [a, b, c, d](const VectorXd& x) {
    const double radial = std::sqrt(x.squaredNorm() / d);
    const double cosine = (c * x.array()).cos().mean();
    // The radial term behaves like |x| near the origin; its contribution is
    // taken to be zero there.
    const double radial_coeff = radial < 1e-12 ? 0.0 : a * b * std::exp(-b * radial) / (d * radial);
    VectorXd g = radial_coeff * x;
    g.array() += (c / d) * std::exp(cosine) * (c * x.array()).sin();
    return g;
  };
  return p;
}

LeastSquaresProblem elliptic_bvp_problem() {
  auto solution_at = [](const VectorXd& x, double u) {
    return x(0) * u + std::exp(-x(1)) * (-u * u / 2.0 + u / 2.0);
  };
  auto forward = [solution_at](const VectorXd& x) {
    VectorXd g(2);
    g(0) = solution_at(x, 0.25);
    g(1) = solution_at(x, 0.75);
    return g;
  };
  auto jacobian = [](const VectorXd& x) {
    MatrixXd j(2, 2);
    const double q1 = -0.25 * 0.25 / 2.0 + 0.25 / 2.0;
    const double q2 = -0.75 * 0.75 / 2.0 + 0.75 / 2.0;
    j(0, 0) = 0.25;
    j(0, 1) = -std::exp(-x(1)) * q1;
    j(1, 0) = 0.75;
    j(1, 1) = -std::exp(-x(1)) * q2;
    return j;
  };
  VectorXd y(2);
  y << 27.5, 79.7;
  const MatrixXd gamma = 0.1 * 0.1 * MatrixXd::Identity(2, 2);
  const MatrixXd gamma0 = 10.0 * 10.0 * MatrixXd::Identity(2, 2);
  return LeastSquaresProblem(2, y, gamma, gamma0, forward, jacobian);
}

LeastSquaresProblem rosenbrock_map_problem(int dimension) {
  if (dimension < 2) throw ShapeError("rosenbrock dimension must be at least 2");
  const int k = 2 * dimension - 2;
  auto forward = [dimension, k](const VectorXd& x) {
    VectorXd g(k);
    for (int i = 0; i + 1 < dimension; ++i) g(i) = 10.0 * (x(i + 1) - x(i) * x(i));
    for (int i = 0; i + 1 < dimension; ++i) g(dimension - 1 + i) = x(i);
    return g;
  };
  auto jacobian = [dimension, k](const VectorXd& x) {
    MatrixXd j = MatrixXd::Zero(k, dimension);
    for (int i = 0; i + 1 < dimension; ++i) {
      j(i, i) = -20.0 * x(i);
      j(i, i + 1) = 10.0;
      j(dimension - 1 + i, i) = 1.0;
    }
    return j;
  };
  VectorXd y = VectorXd::Zero(k);
  y.tail(dimension - 1).setOnes();
  const MatrixXd gamma = 0.1 * 0.1 * MatrixXd::Identity(k, k);
  const MatrixXd gamma0 = 10.0 * 10.0 * MatrixXd::Identity(dimension, dimension);
  return LeastSquaresProblem(dimension, y, gamma, gamma0, forward, jacobian);
}

LeastSquaresProblem affine_problem(MatrixXd a, VectorXd b, VectorXd y, MatrixXd gamma,
                                   MatrixXd gamma0) {
  const int dim = static_cast<int>(a.cols());
  if (b.size() != a.rows() || y.size() != a.rows())
    throw ShapeError("affine map shapes are inconsistent");
  MatrixXd a_copy = a;
  VectorXd b_copy = b;
  auto forward = [a_copy, b_copy](const VectorXd& x) { return VectorXd(a_copy * x + b_copy); };
  auto jacobian = [a_copy](const VectorXd&) { return a_copy; };
  return LeastSquaresProblem(dim, std::move(y), std::move(gamma), std::move(gamma0), forward,
                             jacobian);
}

namespace {
constexpr std::uint64_t kInitialEnsembleSalt = 0x494e4954ull;  // distinct from run streams
}

Ensemble gaussian_ensemble(int dimension, int count, double mean, double stddev,
                           std::uint64_t seed) {
  if (dimension < 1 || count < 1) throw ShapeError("ensemble shape must be positive");
  RngStream stream(mix_seed(seed, kInitialEnsembleSalt), 0);
  MatrixXd positions(dimension, count);
  for (int i = 0; i < count; ++i)
    for (int r = 0; r < dimension; ++r) positions(r, i) = mean + stddev * stream.normal();
  return Ensemble::with_uniform_weights(std::move(positions));
}

Ensemble default_initial_ensemble(const std::string& problem_name, int dimension, int count,
                                  std::uint64_t seed, std::optional<double> mean_override,
                                  std::optional<double> std_override) {
  if (problem_name == "ackley")
    return gaussian_ensemble(dimension, count, mean_override.value_or(0.0),
                             std_override.value_or(30.0), seed);
  if (problem_name == "rosenbrock")
    return gaussian_ensemble(dimension, count, mean_override.value_or(2.0),
                             std_override.value_or(0.3), seed);
  if (problem_name == "elliptic") {
    if (dimension != 2) throw ConfigError("elliptic problem is two-dimensional");
    if (mean_override || std_override)
      throw ConfigError("elliptic initialization is fixed and takes no overrides");
    RngStream stream(mix_seed(seed, kInitialEnsembleSalt), 0);
    MatrixXd positions(2, count);
    for (int i = 0; i < count; ++i) {
      positions(0, i) = stream.normal();
      positions(1, i) = 90.0 + 20.0 * stream.uniform01();
    }
    return Ensemble::with_uniform_weights(std::move(positions));
  }
  throw ConfigError("unknown problem name '" + problem_name + "'");
}

}  // namespace rild
