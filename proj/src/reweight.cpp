#include "rild/reweight.hpp"

#include <algorithm>
#include <cmath>

namespace rild {

using Eigen::VectorXd;

VectorXd update_weights(const VectorXd& weights, const VectorXd& w_values, double tau) {
  if (weights.size() != w_values.size())
    throw ShapeError("fitness value count does not match weight count");
  if (weights.size() == 0) throw ShapeError("empty weight vector");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("weight update requires tau >= 0");
  if (!w_values.allFinite()) throw EvaluationError("non-finite fitness values in weight update");
  const double shift = w_values.maxCoeff();
  const VectorXd updated =
      weights.array() * (tau * (w_values.array() - shift)).exp();
  const double normalizer = updated.sum();
  if (!(normalizer > 0.0) || !std::isfinite(normalizer))
    throw WeightCollapseError("all particle weights collapsed to zero");
  return updated / normalizer;
}

double weight_ratio(const VectorXd& weights) {
  if (weights.size() == 0) throw ShapeError("empty weight vector");
  const double lo = weights.minCoeff();
  const double hi = weights.maxCoeff();
  if (lo <= 0.0) return kInfinity;
  return hi / lo;
}

std::vector<int> resample_indices(const VectorXd& weights, int count, RngStream& rng) {
  const int n = static_cast<int>(weights.size());
  if (n == 0) throw ShapeError("empty weight vector");
  VectorXd cdf(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += weights(i);
    cdf(i) = acc;
  }
  const double total = cdf(n - 1);
  if (!(total > 0.0)) throw WeightCollapseError("cannot resample from all-zero weights");
  std::vector<int> indices(count);
  for (int r = 0; r < count; ++r) {
    const double u = rng.uniform01() * total;
    const double* begin = cdf.data();
    const double* pos = std::upper_bound(begin, begin + n, u);
    indices[r] = std::min(static_cast<int>(pos - begin), n - 1);
  }
  return indices;
}

Ensemble multinomial_resample(const Ensemble& e, RngStream& rng) {
  const std::vector<int> indices = resample_indices(e.weights(), e.size(), rng);
  Eigen::MatrixXd positions(e.dimension(), e.size());
  for (int i = 0; i < e.size(); ++i) positions.col(i) = e.positions().col(indices[i]);
  return Ensemble::with_uniform_weights(std::move(positions));
}

}  // namespace rild
