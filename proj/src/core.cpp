#include "rild/core.hpp"

#include <cmath>

namespace rild {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// --- Ensemble ---------------------------------------------------------------

Ensemble::Ensemble(MatrixXd positions, VectorXd weights)
    : positions_(std::move(positions)), weights_(std::move(weights)) {
  if (positions_.rows() < 1 || positions_.cols() < 1)
    throw ShapeError("ensemble needs at least one particle and one dimension");
  if (weights_.size() != positions_.cols())
    throw ShapeError("weight count does not match particle count");
  if (!positions_.allFinite()) throw std::invalid_argument("non-finite ensemble positions");
  if (!weights_.allFinite() || (weights_.array() < 0.0).any())
    throw std::invalid_argument("ensemble weights must be finite and nonnegative");
  if (std::abs(weights_.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("ensemble weights must sum to one");
}

Ensemble Ensemble::with_uniform_weights(MatrixXd positions) {
  const Eigen::Index n = positions.cols();
  return Ensemble(std::move(positions), VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

VectorXd weighted_mean(const Ensemble& e) { return e.positions() * e.weights(); }

WeightedCovariance weighted_covariance(const Ensemble& e) {
  const VectorXd mean = weighted_mean(e);
  MatrixXd factor = e.positions().colwise() - mean;
  factor = factor * e.weights().array().sqrt().matrix().asDiagonal();
  MatrixXd c = MatrixXd::Zero(e.dimension(), e.dimension());
  c.selfadjointView<Eigen::Lower>().rankUpdate(factor);
  c = c.selfadjointView<Eigen::Lower>();  // mirror to make it exactly symmetric
  return {std::move(c), std::move(factor)};
}

// --- ObjectiveProblem ---------------------------------------------------------

double ObjectiveProblem::evaluate(const VectorXd& x) const {
  if (!value) throw ConfigError("objective has no potential attached");
  if (x.size() != dimension) throw ShapeError("point dimension does not match problem");
  if (!x.allFinite()) throw EvaluationError("potential evaluated at non-finite point");
  const double v = value(x);
  if (!std::isfinite(v)) throw EvaluationError("potential returned a non-finite value");
  return v;
}

VectorXd ObjectiveProblem::evaluate_gradient(const VectorXd& x) const {
  if (!gradient) throw ConfigError("objective has no gradient attached");
  if (x.size() != dimension) throw ShapeError("point dimension does not match problem");
  VectorXd g = gradient(x);
  if (g.size() != dimension) throw ShapeError("gradient dimension does not match problem");
  if (!g.allFinite()) throw EvaluationError("gradient returned a non-finite value");
  return g;
}

// --- LeastSquaresProblem -------------------------------------------------------

LeastSquaresProblem::LeastSquaresProblem(
    int dimension, VectorXd y, MatrixXd gamma, MatrixXd gamma0,
    std::function<VectorXd(const VectorXd&)> forward,
    std::function<MatrixXd(const VectorXd&)> jacobian)
    : dimension_(dimension),
      y_(std::move(y)),
      gamma_(std::move(gamma)),
      gamma0_(std::move(gamma0)),
      forward_(std::move(forward)),
      jacobian_(std::move(jacobian)) {
  if (dimension_ < 1) throw ShapeError("problem dimension must be positive");
  if (y_.size() < 1) throw ShapeError("observation vector must be nonempty");
  if (gamma_.rows() != y_.size() || gamma_.cols() != y_.size())
    throw ShapeError("noise covariance shape does not match observations");
  if (gamma0_.rows() != dimension_ || gamma0_.cols() != dimension_)
    throw ShapeError("prior covariance shape does not match dimension");
  if (!forward_) throw ConfigError("least-squares problem needs a forward map");
  gamma_llt_.compute(gamma_);
  if (gamma_llt_.info() != Eigen::Success)
    throw std::invalid_argument("noise covariance is not positive definite");
  gamma0_llt_.compute(gamma0_);
  if (gamma0_llt_.info() != Eigen::Success)
    throw std::invalid_argument("prior covariance is not positive definite");
}

VectorXd LeastSquaresProblem::forward(const VectorXd& x) const {
  if (x.size() != dimension_) throw ShapeError("point dimension does not match problem");
  if (!x.allFinite()) throw EvaluationError("forward map evaluated at non-finite point");
  VectorXd g = forward_(x);
  if (g.size() != y_.size()) throw ShapeError("forward map output does not match observations");
  if (!g.allFinite()) throw EvaluationError("forward map returned a non-finite value");
  return g;
}

MatrixXd LeastSquaresProblem::jacobian(const VectorXd& x) const {
  if (!jacobian_) throw ConfigError("least-squares problem has no Jacobian attached");
  if (x.size() != dimension_) throw ShapeError("point dimension does not match problem");
  MatrixXd j = jacobian_(x);
  if (j.rows() != y_.size() || j.cols() != dimension_)
    throw ShapeError("Jacobian shape does not match problem");
  return j;
}

VectorXd LeastSquaresProblem::apply_gamma_inverse(const VectorXd& v) const {
  return gamma_llt_.solve(v);
}
MatrixXd LeastSquaresProblem::apply_gamma_inverse(const MatrixXd& m) const {
  return gamma_llt_.solve(m);
}
VectorXd LeastSquaresProblem::apply_gamma0_inverse(const VectorXd& v) const {
  return gamma0_llt_.solve(v);
}
MatrixXd LeastSquaresProblem::apply_gamma0_inverse(const MatrixXd& m) const {
  return gamma0_llt_.solve(m);
}

double LeastSquaresProblem::misfit(const VectorXd& x) const {
  const VectorXd r = y_ - forward(x);
  return r.dot(apply_gamma_inverse(r));
}

double LeastSquaresProblem::potential(const VectorXd& x) const {
  return potential_from_forward(x, forward(x));
}

double LeastSquaresProblem::potential_from_forward(const VectorXd& x, const VectorXd& gx) const {
  const VectorXd r = y_ - gx;
  const double data_term = 0.5 * r.dot(apply_gamma_inverse(r));
  const double prior_term = 0.5 * x.dot(apply_gamma0_inverse(x));
  const double v = data_term + prior_term;
  if (!std::isfinite(v)) throw EvaluationError("induced potential is non-finite");
  return v;
}

VectorXd LeastSquaresProblem::potential_gradient(const VectorXd& x) const {
  const MatrixXd j = jacobian(x);
  const VectorXd r = forward(x) - y_;
  return j.transpose() * apply_gamma_inverse(r) + apply_gamma0_inverse(x);
}

ObjectiveProblem LeastSquaresProblem::induced_objective() const {
  ObjectiveProblem obj;
  obj.dimension = dimension_;
  LeastSquaresProblem self = *this;
  obj.value = [self](const VectorXd& x) { return self.potential(x); };
  if (has_jacobian()) {
    LeastSquaresProblem copy = *this;
    obj.gradient = [copy](const VectorXd& x) { return copy.potential_gradient(x); };
  }
  return obj;
}

double evaluate_potential(const LeastSquaresProblem& problem, const VectorXd& x) {
  return problem.potential(x);
}

AnyProblem AnyProblem::from_objective(ObjectiveProblem p) {
  AnyProblem out;
  out.objective = std::move(p);
  return out;
}

AnyProblem AnyProblem::from_least_squares(LeastSquaresProblem p) {
  AnyProblem out;
  out.objective = p.induced_objective();
  out.least_squares = std::move(p);
  return out;
}

// --- FitnessSource -------------------------------------------------------------

FitnessSource::FitnessSource(std::function<double(const VectorXd&)> fn, double upper_bound,
                             std::string name)
    : fn_(std::move(fn)), bound_(upper_bound), name_(std::move(name)) {
  if (!std::isfinite(bound_)) throw ConfigError("fitness upper bound must be finite");
}

double FitnessSource::operator()(const VectorXd& x) const {
  if (!fn_) return 0.0;
  const double w = fn_(x);
  if (!std::isfinite(w)) throw EvaluationError("fitness returned a non-finite value");
  // Slack absorbs rounding when the true value sits exactly on the bound,
  // e.g. a nonnegative potential evaluating to -1e-16 at its minimum.
  const double slack = 1e-9 * (1.0 + std::abs(bound_));
  if (w > bound_ + slack)
    throw EvaluationError("fitness value " + std::to_string(w) +
                          " exceeds its declared upper bound " + std::to_string(bound_));
  return w;
}

// --- RunConfig -------------------------------------------------------------------

void validate_config(const RunConfig& cfg, bool has_least_squares, bool allow_zero_iterations) {
  if (cfg.ensemble_size < 1) throw ConfigError("ensemble size must be positive");
  if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) throw ConfigError("tau must be positive");
  if (cfg.sigma < 0.0 || !std::isfinite(cfg.sigma))
    throw ConfigError("sigma must be finite and nonnegative");
  const int min_iter = allow_zero_iterations ? 0 : 1;
  if (cfg.max_iterations < min_iter) throw ConfigError("iteration count must be positive");
  if (!(cfg.resample_threshold > 1.0))
    throw ConfigError("resample threshold must exceed 1 (use infinity to disable)");
  if (cfg.drift == DriftMode::DerivativeFree && !has_least_squares)
    throw ConfigError("derivative-free drift requires a least-squares problem");
}

}  // namespace rild
