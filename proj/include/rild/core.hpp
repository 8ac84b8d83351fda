#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "rild/errors.hpp"

namespace rild {

// --- Ensemble ---------------------------------------------------------------

// A weighted particle ensemble. Positions are stored with one particle per
// column (d x N), weights are a probability vector of length N.
class Ensemble {
 public:
  Ensemble(Eigen::MatrixXd positions, Eigen::VectorXd weights);

  static Ensemble with_uniform_weights(Eigen::MatrixXd positions);

  int size() const { return static_cast<int>(positions_.cols()); }
  int dimension() const { return static_cast<int>(positions_.rows()); }

  const Eigen::MatrixXd& positions() const { return positions_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Eigen::VectorXd position(int i) const { return positions_.col(i); }

 private:
  Eigen::MatrixXd positions_;
  Eigen::VectorXd weights_;
};

// Weighted ensemble mean sum_i w_i x_i.
Eigen::VectorXd weighted_mean(const Ensemble& e);

// Weighted ensemble covariance C = sum_i w_i (x_i - xbar)(x_i - xbar)^T
// together with a factor whose columns are sqrt(w_i) (x_i - xbar), so that
// factor * factor^T == matrix and factor * eta is a draw from N(0, C) when
// eta has independent standard normal entries.
struct WeightedCovariance {
  Eigen::MatrixXd matrix;  // d x d, symmetric PSD
  Eigen::MatrixXd factor;  // d x N
};
WeightedCovariance weighted_covariance(const Ensemble& e);

// --- Problems ---------------------------------------------------------------

// A potential to minimize. The gradient is optional; algorithms that need it
// raise ConfigError when it is missing.
struct ObjectiveProblem {
  int dimension = 0;
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;

  bool has_gradient() const { return static_cast<bool>(gradient); }

  // Evaluates the potential, rejecting non-finite inputs and outputs.
  double evaluate(const Eigen::VectorXd& x) const;

  // Evaluates the gradient; ConfigError when no gradient is attached.
  Eigen::VectorXd evaluate_gradient(const Eigen::VectorXd& x) const;
};

// An inverse problem y = G(x) + noise with Gaussian noise covariance gamma
// and Gaussian prior covariance gamma0. Induces the Tikhonov potential
//   V(x) = 1/2 |y - G(x)|^2_gamma + 1/2 |x|^2_gamma0,
// where |v|^2_A = v^T A^{-1} v. Both covariances are factorized once at
// construction and reused by every solve.
class LeastSquaresProblem {
 public:
  LeastSquaresProblem(int dimension, Eigen::VectorXd y, Eigen::MatrixXd gamma,
                      Eigen::MatrixXd gamma0,
                      std::function<Eigen::VectorXd(const Eigen::VectorXd&)> forward,
                      std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian = {});

  int dimension() const { return dimension_; }
  int observation_dim() const { return static_cast<int>(y_.size()); }
  const Eigen::VectorXd& data() const { return y_; }

  // Forward map G(x); EvaluationError on non-finite output.
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  bool has_jacobian() const { return static_cast<bool>(jacobian_); }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;

  Eigen::VectorXd apply_gamma_inverse(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd apply_gamma_inverse(const Eigen::MatrixXd& m) const;
  Eigen::VectorXd apply_gamma0_inverse(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd apply_gamma0_inverse(const Eigen::MatrixXd& m) const;

  // Squared observation misfit |y - G(x)|^2_gamma (no 1/2 factor).
  double misfit(const Eigen::VectorXd& x) const;

  // Induced potential and its gradient DG^T gamma^{-1} (G - y) + gamma0^{-1} x.
  double potential(const Eigen::VectorXd& x) const;
  double potential_from_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& gx) const;
  Eigen::VectorXd potential_gradient(const Eigen::VectorXd& x) const;

  // Wraps the induced potential as an ObjectiveProblem (gradient attached
  // only when a Jacobian is available).
  ObjectiveProblem induced_objective() const;

 private:
  int dimension_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd gamma_, gamma0_;
  Eigen::LLT<Eigen::MatrixXd> gamma_llt_, gamma0_llt_;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> forward_;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian_;
};

// Convenience evaluation of the induced potential.
double evaluate_potential(const LeastSquaresProblem& problem, const Eigen::VectorXd& x);

// A problem handle carrying the potential view and, when the problem came
// from an inverse problem, the structured least-squares view as well.
struct AnyProblem {
  ObjectiveProblem objective;
  std::optional<LeastSquaresProblem> least_squares;

  static AnyProblem from_objective(ObjectiveProblem p);
  static AnyProblem from_least_squares(LeastSquaresProblem p);
};

// --- Fitness ----------------------------------------------------------------

// A reweighting fitness W with a declared upper bound A. Every evaluation is
// checked against the bound; W(x) > A or a non-finite value is an error.
// A default-constructed source is identically zero (no reweighting signal).
class FitnessSource {
 public:
  FitnessSource() = default;
  FitnessSource(std::function<double(const Eigen::VectorXd&)> fn, double upper_bound,
                std::string name = "custom");

  static FitnessSource zero() { return FitnessSource(); }

  double operator()(const Eigen::VectorXd& x) const;
  double upper_bound() const { return bound_; }
  const std::string& name() const { return name_; }

 private:
  std::function<double(const Eigen::VectorXd&)> fn_;
  double bound_ = 0.0;
  std::string name_ = "none";
};

// --- Run configuration -------------------------------------------------------

enum class CovarianceMode { Identity, Weighted };
enum class DriftMode { ExactGradient, DerivativeFree, None };

struct RunConfig {
  int ensemble_size = 50;
  double tau = 0.1;
  double sigma = 1.0;
  int max_iterations = 100;
  // Resampling triggers when max_i w_i / min_i w_i exceeds this; may be
  // infinity to disable resampling entirely.
  double resample_threshold = 1e3;
  std::uint64_t seed = 0;
  CovarianceMode covariance = CovarianceMode::Identity;
  DriftMode drift = DriftMode::ExactGradient;
  // When set, tau acts as a base step tau0 and each iteration uses
  // tau0 / (|drifts|_F / sqrt(N) + 1e-8), clamped to [1e-6 tau0, 10 tau0].
  bool adaptive_tau = false;
};

// Validates scalar ranges and mode/problem compatibility. ConfigError on
// violation. allow_zero_iterations relaxes the iteration count check for
// budget-driven callers that may legitimately run zero iterations.
void validate_config(const RunConfig& cfg, bool has_least_squares,
                     bool allow_zero_iterations = false);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace rild
