#pragma once

#include <Eigen/Core>
#include <vector>

#include "rild/core.hpp"
#include "rild/rng.hpp"

namespace rild {

// Multiplicative exponential reweighting followed by normalization:
//   w_i  <-  w_i exp(tau W_i) / sum_j w_j exp(tau W_j).
// Implemented with the max of W subtracted inside the exponential, which
// cancels in the quotient, never overflows, and makes the result invariant
// under adding a constant to every W_i. Throws WeightCollapseError when the
// normalizer vanishes.
Eigen::VectorXd update_weights(const Eigen::VectorXd& weights, const Eigen::VectorXd& w_values,
                               double tau);

// max_i w_i / min_i w_i; returns +infinity when any weight is zero.
double weight_ratio(const Eigen::VectorXd& weights);

// N i.i.d. categorical draws from the weight vector (inverse CDF on uniforms
// from the supplied stream). Returned indices are what multinomial_resample
// copies; exposed so callers can reorder per-particle caches consistently.
std::vector<int> resample_indices(const Eigen::VectorXd& weights, int count, RngStream& rng);

// Resamples the ensemble with replacement according to its weights and
// resets all weights to 1/N.
Ensemble multinomial_resample(const Ensemble& e, RngStream& rng);

}  // namespace rild
