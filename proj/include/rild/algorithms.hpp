#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rild/core.hpp"

namespace rild {

enum class Algorithm { Rild, RildGradFree, Gld, Eks, Eki };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);  // ConfigError on unknown names

// Per-iteration trace row. Row 0 describes the initial state (no step taken,
// tau and resampled are 0). mean_potential is the weighted ensemble mean
// sum_i w_i V(x_i); best_potential is the running minimum over every
// potential value seen so far. evaluations counts one unit per particle per
// iteration (one per iteration for the single-chain method), excluding the
// free bookkeeping evaluation of the initial state.
struct IterationStats {
  int iteration = 0;
  double mean_potential = 0.0;
  double best_potential = 0.0;
  long evaluations = 0;
  double tau = 0.0;
  bool resampled = false;
};

struct RunRecord {
  std::string algorithm;
  RunConfig config;
  std::string fitness_name = "none";
  std::vector<IterationStats> trace;
  // Post-iteration particle positions (d x N) for requested iterations.
  std::map<int, Eigen::MatrixXd> snapshots;
  std::optional<Ensemble> final_ensemble;
};

// Reweighted interacting Langevin descent. Per iteration: build the
// preconditioner (identity or weighted ensemble covariance), compute drifts
// (preconditioned exact gradients or the gradient-free coupling), take an
// Euler-Maruyama step per particle, reweight by exp(tau W), and resample
// when the weight ratio passes cfg.resample_threshold.
//
// Particle i consumes RngStream(seed, i); resampling has its own stream N,
// so runs are reproducible and independent of scheduling. On divergence a
// DivergenceError is thrown carrying the failing iteration; when
// partial_out is non-null it receives the rows recorded before the failure.
RunRecord run_rild(const AnyProblem& problem, const FitnessSource& fitness, const RunConfig& cfg,
                   const Ensemble& init, const std::vector<int>& snapshot_iterations = {},
                   RunRecord* partial_out = nullptr);

// Drift-free variant: pure diffusion plus reweighting/resampling. Works on
// problems without gradients or forward maps.
RunRecord run_rild_gradfree(const AnyProblem& problem, const FitnessSource& fitness,
                            const RunConfig& cfg, const Ensemble& init,
                            const std::vector<int>& snapshot_iterations = {},
                            RunRecord* partial_out = nullptr);

// Single-chain overdamped Langevin descent:
//   x <- x - grad V(x) tau + sqrt(tau sigma^2) xi.
// Uses RngStream(seed, stream_index); running chain i of an ensemble with
// stream_index = i reproduces run_rild with identity covariance, zero
// fitness, and resampling disabled, bit for bit.
RunRecord run_gld(const ObjectiveProblem& problem, const RunConfig& cfg,
                  const Eigen::VectorXd& x0, int stream_index = 0,
                  const std::vector<int>& snapshot_iterations = {},
                  RunRecord* partial_out = nullptr);

// Ensemble Kalman sampler: the interacting loop with weighted covariance,
// gradient-free drift, zero fitness, and resampling disabled. cfg.covariance
// and cfg.drift are ignored (forced to those settings).
RunRecord run_eks(const LeastSquaresProblem& problem, const RunConfig& cfg, const Ensemble& init,
                  const std::vector<int>& snapshot_iterations = {},
                  RunRecord* partial_out = nullptr);

// Ensemble Kalman inversion: the sampler loop with sigma forced to zero and
// the prior drift term dropped, leaving the deterministic misfit-only flow.
RunRecord run_eki(const LeastSquaresProblem& problem, const RunConfig& cfg, const Ensemble& init,
                  const std::vector<int>& snapshot_iterations = {},
                  RunRecord* partial_out = nullptr);

// --- Pass-rate sweeps ---------------------------------------------------------

struct SweepCell {
  double tau = 0.0;
  double sigma = 0.0;
  int trials = 0;
  int passes = 0;
  double rate = 0.0;
};

struct SweepResult {
  std::vector<double> tau_list;
  std::vector<double> sigma_list;
  std::vector<SweepCell> cells;  // row-major: tau outer, sigma inner
};

// Runs `trials` independent runs per (tau, sigma) grid cell and reports the
// fraction that find a potential value below pass_threshold within
// eval_budget potential evaluations. Every trial in every cell starts from
// the same initial ensemble; trial randomness comes from seeds derived from
// base.seed. The single-chain method starts each trial from a uniformly
// chosen member of the initial ensemble and spends one evaluation per
// iteration; ensemble methods spend N per iteration. Diverged or otherwise
// failed runs count as failed trials. Cells are independent jobs and may be
// executed on `threads` worker threads; results do not depend on the thread
// count.
SweepResult pass_rate_sweep(const AnyProblem& problem, const FitnessSource& fitness,
                            Algorithm algorithm, const std::vector<double>& tau_list,
                            const std::vector<double>& sigma_list, int trials,
                            const RunConfig& base, double pass_threshold, long eval_budget,
                            const Ensemble& init, int threads = 1);

}  // namespace rild
