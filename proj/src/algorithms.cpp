#include "rild/algorithms.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "rild/dynamics.hpp"
#include "rild/reweight.hpp"
#include "rild/rng.hpp"

namespace rild {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Rild: return "rild";
    case Algorithm::RildGradFree: return "rild_gradfree";
    case Algorithm::Gld: return "gld";
    case Algorithm::Eks: return "eks";
    case Algorithm::Eki: return "eki";
  }
  throw ConfigError("unhandled algorithm");
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "rild") return Algorithm::Rild;
  if (name == "rild_gradfree") return Algorithm::RildGradFree;
  if (name == "gld") return Algorithm::Gld;
  if (name == "eks") return Algorithm::Eks;
  if (name == "eki") return Algorithm::Eki;
  throw ConfigError("unknown algorithm '" + name + "'");
}

namespace {

struct EngineSettings {
  DriftMode drift = DriftMode::ExactGradient;
  CovarianceMode covariance = CovarianceMode::Identity;
  bool include_prior_drift = true;
  const char* name = "rild";
};

bool snapshot_requested(const std::vector<int>& wanted, int iteration) {
  return std::find(wanted.begin(), wanted.end(), iteration) != wanted.end();
}

VectorXd potentials_direct(const ObjectiveProblem& obj, const MatrixXd& positions) {
  VectorXd v(positions.cols());
  for (Eigen::Index i = 0; i < positions.cols(); ++i) v(i) = obj.evaluate(positions.col(i));
  return v;
}

MatrixXd forward_all(const LeastSquaresProblem& p, const MatrixXd& positions) {
  MatrixXd g(p.observation_dim(), positions.cols());
  for (Eigen::Index i = 0; i < positions.cols(); ++i) g.col(i) = p.forward(positions.col(i));
  return g;
}

VectorXd potentials_from_forward(const LeastSquaresProblem& p, const MatrixXd& positions,
                                 const MatrixXd& g_values) {
  const MatrixXd residual = g_values.colwise() - p.data();
  const MatrixXd solved = p.apply_gamma_inverse(residual);
  const MatrixXd prior_solved = p.apply_gamma0_inverse(positions);
  VectorXd v(positions.cols());
  for (Eigen::Index i = 0; i < positions.cols(); ++i) {
    v(i) = 0.5 * residual.col(i).dot(solved.col(i)) +
           0.5 * positions.col(i).dot(prior_solved.col(i));
  }
  if (!v.allFinite()) throw EvaluationError("induced potential is non-finite");
  return v;
}

// Shared interacting-particle iteration behind run_rild, run_rild_gradfree,
// run_eks, and run_eki. The wrappers differ only in their EngineSettings,
// the fitness source, and whether resampling can trigger.
RunRecord run_particle_engine(const AnyProblem& problem, const FitnessSource& fitness,
                              const RunConfig& cfg, const Ensemble& init,
                              const std::vector<int>& snapshot_iterations,
                              const EngineSettings& engine, RunRecord* partial_out) {
  validate_config(cfg, problem.least_squares.has_value(), /*allow_zero_iterations=*/true);
  if (init.size() != cfg.ensemble_size)
    throw ConfigError("initial ensemble size does not match configuration");
  if (init.dimension() != problem.objective.dimension)
    throw ShapeError("initial ensemble dimension does not match problem");
  if (engine.drift == DriftMode::DerivativeFree && !problem.least_squares)
    throw ConfigError("derivative-free drift requires a least-squares problem");

  const int n = init.size();
  const int d = init.dimension();
  const bool use_forward_cache = engine.drift == DriftMode::DerivativeFree;
  const LeastSquaresProblem* lsq =
      problem.least_squares ? &problem.least_squares.value() : nullptr;

  std::vector<RngStream> streams;
  streams.reserve(n);
  for (int i = 0; i < n; ++i) streams.emplace_back(cfg.seed, static_cast<std::uint64_t>(i));
  RngStream resample_rng(cfg.seed, static_cast<std::uint64_t>(n));

  MatrixXd positions = init.positions();
  VectorXd weights = init.weights();
  MatrixXd g_values;
  if (use_forward_cache) g_values = forward_all(*lsq, positions);
  VectorXd potentials = use_forward_cache
                            ? potentials_from_forward(*lsq, positions, g_values)
                            : potentials_direct(problem.objective, positions);

  RunRecord rec;
  rec.algorithm = engine.name;
  rec.config = cfg;
  rec.fitness_name = fitness.name();
  double best = potentials.minCoeff();
  rec.trace.push_back({0, weights.dot(potentials), best, 0, 0.0, false});
  if (snapshot_requested(snapshot_iterations, 0)) rec.snapshots[0] = positions;

  long evaluations = 0;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    try {
      const Ensemble ensemble(positions, weights);
      const Preconditioner pre =
          engine.covariance == CovarianceMode::Weighted
              ? Preconditioner::from_covariance(weighted_covariance(ensemble))
              : Preconditioner::identity();

      MatrixXd drifts(d, n);
      switch (engine.drift) {
        case DriftMode::ExactGradient:
          for (int i = 0; i < n; ++i)
            drifts.col(i) = exact_preconditioned_drift(ensemble, i, problem.objective, pre);
          break;
        case DriftMode::DerivativeFree:
          drifts = derivative_free_drift_all(ensemble, g_values, *lsq, pre,
                                             engine.include_prior_drift);
          break;
        case DriftMode::None:
          drifts.setZero();
          break;
      }

      const double tau = cfg.adaptive_tau ? adaptive_timestep(drifts, cfg.tau) : cfg.tau;
      const StepInputs step{pre, tau, cfg.sigma};
      const Eigen::Index noise_dim = pre.noise_dimension(d);
      MatrixXd next(d, n);
      for (int i = 0; i < n; ++i) {
        const VectorXd noise = cfg.sigma > 0.0 ? streams[static_cast<size_t>(i)].normal_vector(noise_dim)
                                               : VectorXd::Zero(noise_dim);
        next.col(i) = langevin_step(positions.col(i), drifts.col(i), step, noise);
      }

      MatrixXd g_next;
      VectorXd pot_next;
      if (use_forward_cache) {
        g_next = forward_all(*lsq, next);
        pot_next = potentials_from_forward(*lsq, next, g_next);
      } else {
        pot_next = potentials_direct(problem.objective, next);
      }
      best = std::min(best, pot_next.minCoeff());

      VectorXd fitness_values(n);
      for (int i = 0; i < n; ++i) fitness_values(i) = fitness(next.col(i));
      VectorXd new_weights = update_weights(weights, fitness_values, tau);
      const double mean_potential = new_weights.dot(pot_next);

      bool resampled = false;
      if (weight_ratio(new_weights) > cfg.resample_threshold) {
        const std::vector<int> picks = resample_indices(new_weights, n, resample_rng);
        MatrixXd reordered(d, n);
        for (int i = 0; i < n; ++i) reordered.col(i) = next.col(picks[static_cast<size_t>(i)]);
        next = std::move(reordered);
        if (use_forward_cache) {
          MatrixXd g_reordered(g_next.rows(), n);
          for (int i = 0; i < n; ++i) g_reordered.col(i) = g_next.col(picks[static_cast<size_t>(i)]);
          g_next = std::move(g_reordered);
        }
        new_weights = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
        resampled = true;
      }

      positions = std::move(next);
      weights = std::move(new_weights);
      if (use_forward_cache) g_values = std::move(g_next);
      evaluations += n;
      rec.trace.push_back({iter + 1, mean_potential, best, evaluations, tau, resampled});
      if (snapshot_requested(snapshot_iterations, iter + 1)) rec.snapshots[iter + 1] = positions;
    } catch (const DivergenceError& err) {
      rec.final_ensemble = Ensemble(positions, weights);  // last finite state
      if (partial_out) *partial_out = rec;
      throw DivergenceError(std::string(err.what()) + " at iteration " +
                                std::to_string(iter + 1),
                            iter + 1);
    } catch (const Error&) {
      rec.final_ensemble = Ensemble(positions, weights);
      if (partial_out) *partial_out = rec;
      throw;
    }
  }

  rec.final_ensemble = Ensemble(positions, weights);
  return rec;
}

}  // namespace

RunRecord run_rild(const AnyProblem& problem, const FitnessSource& fitness, const RunConfig& cfg,
                   const Ensemble& init, const std::vector<int>& snapshot_iterations,
                   RunRecord* partial_out) {
  EngineSettings engine;
  engine.drift = cfg.drift;
  engine.covariance = cfg.covariance;
  engine.name = "rild";
  if (cfg.drift == DriftMode::None)
    throw ConfigError("run_rild requires a drift mode; use run_rild_gradfree for none");
  return run_particle_engine(problem, fitness, cfg, init, snapshot_iterations, engine,
                             partial_out);
}

RunRecord run_rild_gradfree(const AnyProblem& problem, const FitnessSource& fitness,
                            const RunConfig& cfg, const Ensemble& init,
                            const std::vector<int>& snapshot_iterations, RunRecord* partial_out) {
  EngineSettings engine;
  engine.drift = DriftMode::None;
  engine.covariance = cfg.covariance;
  engine.name = "rild_gradfree";
  RunConfig adjusted = cfg;
  adjusted.drift = DriftMode::None;
  return run_particle_engine(problem, fitness, adjusted, init, snapshot_iterations, engine,
                             partial_out);
}

RunRecord run_eks(const LeastSquaresProblem& problem, const RunConfig& cfg, const Ensemble& init,
                  const std::vector<int>& snapshot_iterations, RunRecord* partial_out) {
  EngineSettings engine;
  engine.drift = DriftMode::DerivativeFree;
  engine.covariance = CovarianceMode::Weighted;
  engine.name = "eks";
  RunConfig adjusted = cfg;
  adjusted.drift = DriftMode::DerivativeFree;
  adjusted.covariance = CovarianceMode::Weighted;
  adjusted.resample_threshold = kInfinity;
  return run_particle_engine(AnyProblem::from_least_squares(problem), FitnessSource::zero(),
                             adjusted, init, snapshot_iterations, engine, partial_out);
}

RunRecord run_eki(const LeastSquaresProblem& problem, const RunConfig& cfg, const Ensemble& init,
                  const std::vector<int>& snapshot_iterations, RunRecord* partial_out) {
  EngineSettings engine;
  engine.drift = DriftMode::DerivativeFree;
  engine.covariance = CovarianceMode::Weighted;
  engine.include_prior_drift = false;
  engine.name = "eki";
  RunConfig adjusted = cfg;
  adjusted.drift = DriftMode::DerivativeFree;
  adjusted.covariance = CovarianceMode::Weighted;
  adjusted.resample_threshold = kInfinity;
  adjusted.sigma = 0.0;
  return run_particle_engine(AnyProblem::from_least_squares(problem), FitnessSource::zero(),
                             adjusted, init, snapshot_iterations, engine, partial_out);
}

RunRecord run_gld(const ObjectiveProblem& problem, const RunConfig& cfg, const VectorXd& x0,
                  int stream_index, const std::vector<int>& snapshot_iterations,
                  RunRecord* partial_out) {
  validate_config(cfg, false, /*allow_zero_iterations=*/true);
  if (!problem.has_gradient()) throw ConfigError("single-chain descent requires a gradient");
  if (x0.size() != problem.dimension)
    throw ShapeError("start point dimension does not match problem");

  const Eigen::Index d = x0.size();
  RngStream stream(cfg.seed, static_cast<std::uint64_t>(stream_index));
  const StepInputs step{Preconditioner::identity(), cfg.tau, cfg.sigma};

  RunRecord rec;
  rec.algorithm = "gld";
  rec.config = cfg;
  VectorXd x = x0;
  double value = problem.evaluate(x);
  double best = value;
  rec.trace.push_back({0, value, best, 0, 0.0, false});
  if (snapshot_requested(snapshot_iterations, 0)) rec.snapshots[0] = x;

  long evaluations = 0;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    try {
      const VectorXd drift = problem.evaluate_gradient(x);
      const VectorXd noise = cfg.sigma > 0.0 ? stream.normal_vector(d) : VectorXd::Zero(d);
      x = langevin_step(x, drift, step, noise);
      value = problem.evaluate(x);
      best = std::min(best, value);
      evaluations += 1;
      rec.trace.push_back({iter + 1, value, best, evaluations, cfg.tau, false});
      if (snapshot_requested(snapshot_iterations, iter + 1)) rec.snapshots[iter + 1] = x;
    } catch (const DivergenceError& err) {
      rec.final_ensemble = Ensemble::with_uniform_weights(x);
      if (partial_out) *partial_out = rec;
      throw DivergenceError(std::string(err.what()) + " at iteration " +
                                std::to_string(iter + 1),
                            iter + 1);
    } catch (const Error&) {
      rec.final_ensemble = Ensemble::with_uniform_weights(x);
      if (partial_out) *partial_out = rec;
      throw;
    }
  }
  rec.final_ensemble = Ensemble::with_uniform_weights(x);
  return rec;
}

// --- pass_rate_sweep ------------------------------------------------------------

namespace {

bool run_sweep_trial(const AnyProblem& problem, const FitnessSource& fitness,
                     Algorithm algorithm, RunConfig cfg, double pass_threshold, long eval_budget,
                     const Ensemble& init) {
  const long per_iteration = algorithm == Algorithm::Gld ? 1 : init.size();
  cfg.ensemble_size = init.size();
  cfg.max_iterations = static_cast<int>(eval_budget / per_iteration);
  try {
    RunRecord rec;
    switch (algorithm) {
      case Algorithm::Rild:
        rec = run_rild(problem, fitness, cfg, init);
        break;
      case Algorithm::RildGradFree:
        rec = run_rild_gradfree(problem, fitness, cfg, init);
        break;
      case Algorithm::Gld: {
        // Start from a uniformly chosen member of the shared initial ensemble.
        RngStream pick(cfg.seed, static_cast<std::uint64_t>(init.size()) + 1);
        const int index = std::min(init.size() - 1,
                                   static_cast<int>(pick.uniform01() * init.size()));
        rec = run_gld(problem.objective, cfg, init.positions().col(index));
        break;
      }
      case Algorithm::Eks:
        if (!problem.least_squares) throw ConfigError("eks requires a least-squares problem");
        rec = run_eks(*problem.least_squares, cfg, init);
        break;
      case Algorithm::Eki:
        if (!problem.least_squares) throw ConfigError("eki requires a least-squares problem");
        rec = run_eki(*problem.least_squares, cfg, init);
        break;
    }
    // best_potential is nonincreasing and every recorded row fits the budget.
    return rec.trace.back().best_potential < pass_threshold;
  } catch (const Error&) {
    return false;  // diverged or otherwise failed trials count as failures
  }
}

}  // namespace

SweepResult pass_rate_sweep(const AnyProblem& problem, const FitnessSource& fitness,
                            Algorithm algorithm, const std::vector<double>& tau_list,
                            const std::vector<double>& sigma_list, int trials,
                            const RunConfig& base, double pass_threshold, long eval_budget,
                            const Ensemble& init, int threads) {
  if (tau_list.empty() || sigma_list.empty()) throw ConfigError("sweep grid must be nonempty");
  for (double t : tau_list)
    if (!(t > 0.0)) throw ConfigError("sweep tau values must be positive");
  for (double s : sigma_list)
    if (!(s > 0.0)) throw ConfigError("sweep sigma values must be positive");
  if (trials < 1) throw ConfigError("sweep needs at least one trial");
  if (eval_budget < 0) throw ConfigError("evaluation budget must be nonnegative");

  const size_t cells = tau_list.size() * sigma_list.size();
  const size_t jobs = cells * static_cast<size_t>(trials);
  std::vector<char> passed(jobs, 0);

  auto run_job = [&](size_t job) {
    const size_t cell = job / static_cast<size_t>(trials);
    const int trial = static_cast<int>(job % static_cast<size_t>(trials));
    const size_t ti = cell / sigma_list.size();
    const size_t si = cell % sigma_list.size();
    RunConfig cfg = base;
    cfg.tau = tau_list[ti];
    cfg.sigma = sigma_list[si];
    cfg.seed = mix_seed(base.seed, job + 1);
    passed[job] = run_sweep_trial(problem, fitness, algorithm, cfg, pass_threshold, eval_budget,
                                  init)
                      ? 1
                      : 0;
    (void)trial;
  };

  const int worker_count = std::max(1, threads);
  if (worker_count == 1) {
    for (size_t job = 0; job < jobs; ++job) run_job(job);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t job = next.fetch_add(1); job < jobs; job = next.fetch_add(1)) run_job(job);
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < worker_count; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
  }

  SweepResult result;
  result.tau_list = tau_list;
  result.sigma_list = sigma_list;
  for (size_t ti = 0; ti < tau_list.size(); ++ti) {
    for (size_t si = 0; si < sigma_list.size(); ++si) {
      const size_t cell = ti * sigma_list.size() + si;
      int passes = 0;
      for (int t = 0; t < trials; ++t)
        passes += passed[cell * static_cast<size_t>(trials) + static_cast<size_t>(t)];
      result.cells.push_back({tau_list[ti], sigma_list[si], trials, passes,
                              static_cast<double>(passes) / static_cast<double>(trials)});
    }
  }
  return result;
}

}  // namespace rild
