#include "rild/algorithms.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

#include "rild/dynamics.hpp"
#include "rild/problems.hpp"
#include "rild/reweight.hpp"
#include "rild/rng.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace rild;

namespace {

// V(x) = |x|^2 / 2, grad V(x) = x.
ObjectiveProblem quadratic(int d) {
  ObjectiveProblem p;
  p.dimension = d;
  p.value = [](const VectorXd& x) { return 0.5 * x.squaredNorm(); };
  p.gradient = [](const VectorXd& x) { return x; };
  return p;
}

// Tilted double well: V(x) = (x^2 - 1)^2 + 0.2 x, deeper minimum near x = -1.
ObjectiveProblem double_well() {
  ObjectiveProblem p;
  p.dimension = 1;
  p.value = [](const VectorXd& x) {
    const double s = x(0) * x(0) - 1.0;
    return s * s + 0.2 * x(0);
  };
  p.gradient = [](const VectorXd& x) {
    VectorXd g(1);
    g(0) = 4.0 * x(0) * (x(0) * x(0) - 1.0) + 0.2;
    return g;
  };
  return p;
}

LeastSquaresProblem small_affine() {
  MatrixXd a(3, 2);
  a << 1.0, 0.4, -0.3, 1.2, 0.8, -0.5;
  VectorXd b(3), y(3);
  b << 0.1, -0.2, 0.3;
  y << 1.0, 0.5, -0.25;
  return affine_problem(a, b, y, 0.5 * MatrixXd::Identity(3, 3),
                        4.0 * MatrixXd::Identity(2, 2));
}

double mass_below_zero(const Ensemble& e) {
  double mass = 0.0;
  for (int i = 0; i < e.size(); ++i)
    if (e.positions()(0, i) < 0.0) mass += e.weights()(i);
  return mass;
}

}  // namespace

TEST_SUITE("algorithms") {

TEST_CASE("algorithm names round-trip") {
  for (Algorithm a : {Algorithm::Rild, Algorithm::RildGradFree, Algorithm::Gld, Algorithm::Eks,
                      Algorithm::Eki}) {
    CHECK(algorithm_from_name(algorithm_name(a)) == a);
  }
  CHECK(algorithm_name(Algorithm::RildGradFree) == "rild_gradfree");
  CHECK_THROWS_AS(algorithm_from_name("simulated_annealing"), ConfigError);
}

TEST_CASE("noiseless single chain contracts a quadratic geometrically") {
  RunConfig cfg;
  cfg.tau = 0.1;
  cfg.sigma = 0.0;
  cfg.max_iterations = 10;
  const RunRecord rec = run_gld(quadratic(1), cfg, VectorXd::Ones(1));

  REQUIRE(rec.trace.size() == 11);
  CHECK(rec.trace[0].iteration == 0);
  CHECK(rec.trace[0].mean_potential == 0.5);
  CHECK(rec.trace[0].evaluations == 0);
  CHECK(rec.trace[0].tau == 0.0);
  for (int k = 1; k <= 10; ++k) {
    const double expected = 0.5 * std::pow(0.81, k);  // x_k = 0.9^k
    CHECK(rec.trace[k].mean_potential == doctest::Approx(expected).epsilon(1e-12));
    CHECK(rec.trace[k].mean_potential < rec.trace[k - 1].mean_potential);
    CHECK(rec.trace[k].best_potential == rec.trace[k].mean_potential);
    CHECK(rec.trace[k].evaluations == k);
    CHECK(rec.trace[k].tau == 0.1);
    CHECK_FALSE(rec.trace[k].resampled);
  }
  REQUIRE(rec.final_ensemble.has_value());
  CHECK(rec.final_ensemble->positions()(0, 0) ==
        doctest::Approx(std::pow(0.9, 10)).epsilon(1e-12));
}

TEST_CASE("single chain replays its random stream step for step") {
  const ObjectiveProblem p = quadratic(3);
  RunConfig cfg;
  cfg.tau = 0.05;
  cfg.sigma = 1.5;
  cfg.max_iterations = 10;
  cfg.seed = 42;
  VectorXd x0(3);
  x0 << 1.0, -2.0, 0.5;

  std::vector<int> every;
  for (int k = 1; k <= 10; ++k) every.push_back(k);
  const RunRecord rec = run_gld(p, cfg, x0, /*stream_index=*/3, every);

  RngStream stream(cfg.seed, 3);
  const StepInputs step{Preconditioner::identity(), cfg.tau, cfg.sigma};
  VectorXd x = x0;
  for (int k = 1; k <= 10; ++k) {
    const VectorXd drift = p.evaluate_gradient(x);
    const VectorXd noise = stream.normal_vector(3);
    x = langevin_step(x, drift, step, noise);
    REQUIRE(rec.snapshots.count(k) == 1);
    CHECK(rec.snapshots.at(k) == x);
  }
  CHECK(rec.final_ensemble->positions() == x);
}

TEST_CASE("interacting run without reweighting equals independent chains bit for bit") {
  const ObjectiveProblem p = quadratic(2);
  const AnyProblem any = AnyProblem::from_objective(p);

  RunConfig cfg;
  cfg.ensemble_size = 4;
  cfg.tau = 0.05;
  cfg.sigma = 1.0;
  cfg.max_iterations = 20;
  cfg.seed = 9;
  cfg.resample_threshold = kInfinity;
  cfg.covariance = CovarianceMode::Identity;
  cfg.drift = DriftMode::ExactGradient;

  const Ensemble init = gaussian_ensemble(2, 4, 0.0, 2.0, 123);
  const RunRecord ensemble_rec = run_rild(any, FitnessSource::zero(), cfg, init);

  for (int i = 0; i < 4; ++i) {
    RunConfig chain = cfg;
    chain.ensemble_size = 1;
    const RunRecord chain_rec = run_gld(p, chain, init.positions().col(i), /*stream_index=*/i);
    CHECK(ensemble_rec.final_ensemble->positions().col(i) ==
          chain_rec.final_ensemble->positions().col(0));
    CHECK(chain_rec.trace.back().evaluations == 20);
  }
  CHECK(ensemble_rec.trace.back().evaluations == 20 * 4);
  CHECK(ensemble_rec.trace[1].evaluations == 4);
}

TEST_CASE("noiseless ensemble sampler follows the covariance-preconditioned gradient flow") {
  const LeastSquaresProblem lsq = small_affine();
  RunConfig cfg;
  cfg.ensemble_size = 5;
  cfg.tau = 0.05;
  cfg.sigma = 0.0;
  cfg.max_iterations = 8;
  const Ensemble init = gaussian_ensemble(2, 5, 0.5, 1.0, 21);

  const RunRecord rec = run_eks(lsq, cfg, init);
  CHECK(rec.algorithm == "eks");

  MatrixXd positions = init.positions();
  for (int iter = 0; iter < 8; ++iter) {
    const Ensemble e = Ensemble::with_uniform_weights(positions);
    const MatrixXd c = weighted_covariance(e).matrix;
    MatrixXd next(2, 5);
    for (int i = 0; i < 5; ++i)
      next.col(i) = positions.col(i) - cfg.tau * (c * lsq.potential_gradient(positions.col(i)));
    positions = next;
  }
  const double scale = positions.cwiseAbs().maxCoeff();
  CHECK((rec.final_ensemble->positions() - positions).cwiseAbs().maxCoeff() < 1e-8 * scale);
}

TEST_CASE("ensemble methods freeze a fully collapsed ensemble") {
  const LeastSquaresProblem lsq = small_affine();
  VectorXd point(2);
  point << 0.7, -0.3;
  MatrixXd positions = point.replicate(1, 6);
  const Ensemble init = Ensemble::with_uniform_weights(positions);

  RunConfig cfg;
  cfg.ensemble_size = 6;
  cfg.tau = 0.1;
  cfg.sigma = 1.0;
  cfg.max_iterations = 3;
  const RunRecord rec = run_eks(lsq, cfg, init);
  CHECK(rec.final_ensemble->positions() == positions);
}

TEST_CASE("misfit-only inversion drives the mean toward the least-squares fit") {
  const LeastSquaresProblem lsq = small_affine();
  RunConfig cfg;
  cfg.ensemble_size = 6;
  cfg.tau = 0.02;
  cfg.max_iterations = 1000;
  const Ensemble init = gaussian_ensemble(2, 6, 0.0, 1.0, 33);

  const RunRecord rec = run_eki(lsq, cfg, init);
  CHECK(rec.algorithm == "eki");

  // Three observations of two parameters: the misfit has a positive floor at
  // the least-squares solution, so measure the excess above that floor.
  MatrixXd a(3, 2);
  a << 1.0, 0.4, -0.3, 1.2, 0.8, -0.5;
  VectorXd b(3), y(3);
  b << 0.1, -0.2, 0.3;
  y << 1.0, 0.5, -0.25;
  const VectorXd xstar = (a.transpose() * a).ldlt().solve(a.transpose() * (y - b));
  const double optimal = lsq.misfit(xstar);

  const double before = lsq.misfit(weighted_mean(init));
  const double after = lsq.misfit(weighted_mean(*rec.final_ensemble));
  CHECK(after - optimal < 0.05 * (before - optimal));

  const RunRecord again = run_eki(lsq, cfg, init);  // sigma is forced to zero
  CHECK(again.final_ensemble->positions() == rec.final_ensemble->positions());
}

TEST_CASE("driftless runs spread at the Brownian rate") {
  const AnyProblem any = AnyProblem::from_objective(quadratic(1));
  RunConfig cfg;
  cfg.ensemble_size = 1000;
  cfg.tau = 0.01;
  cfg.sigma = 2.0;
  cfg.max_iterations = 10;
  cfg.seed = 4;
  cfg.resample_threshold = kInfinity;
  const Ensemble init = Ensemble::with_uniform_weights(MatrixXd::Zero(1, 1000));

  const RunRecord rec = run_rild_gradfree(any, FitnessSource::zero(), cfg, init);
  const Eigen::ArrayXd xs = rec.final_ensemble->positions().row(0).array();
  const double expected_var = 10 * cfg.tau * cfg.sigma * cfg.sigma;  // 0.4
  const double mean = xs.mean();
  const double var = (xs - mean).square().mean();
  CHECK(std::abs(mean) < 4.0 * std::sqrt(expected_var / 1000.0));
  CHECK(var == doctest::Approx(expected_var).epsilon(0.10));
}

TEST_CASE("reweighting concentrates mass in the deeper well") {
  const ObjectiveProblem well = double_well();
  const AnyProblem any = AnyProblem::from_objective(well);
  const FitnessSource fitness([&well](const VectorXd& x) { return -well.evaluate(x); }, 0.25,
                              "negV");
  const Ensemble init = gaussian_ensemble(1, 400, 0.0, 1.0, 11);

  RunConfig cfg;
  cfg.ensemble_size = 400;
  cfg.tau = 0.01;
  cfg.max_iterations = 1000;
  cfg.seed = 2;
  cfg.resample_threshold = 1e3;

  cfg.sigma = 0.3;
  const double cold_mass = mass_below_zero(*run_rild(any, fitness, cfg, init).final_ensemble);
  cfg.sigma = 1.5;
  const double hot_mass = mass_below_zero(*run_rild(any, fitness, cfg, init).final_ensemble);

  CHECK(cold_mass > 0.9);
  CHECK(hot_mass < cold_mass - 0.05);
  CHECK(hot_mass > 0.2);  // the deeper well still holds a plurality
}

TEST_CASE("identical seeds reproduce a run and different seeds do not") {
  const AnyProblem any = AnyProblem::from_objective(quadratic(3));
  const FitnessSource fitness([](const VectorXd& x) { return -0.5 * x.squaredNorm(); }, 0.0);
  const Ensemble init = gaussian_ensemble(3, 8, 0.0, 1.0, 5);

  RunConfig cfg;
  cfg.ensemble_size = 8;
  cfg.tau = 0.05;
  cfg.sigma = 1.0;
  cfg.max_iterations = 25;
  cfg.seed = 17;
  cfg.resample_threshold = 50.0;

  const RunRecord a = run_rild(any, fitness, cfg, init);
  const RunRecord b = run_rild(any, fitness, cfg, init);
  CHECK(a.final_ensemble->positions() == b.final_ensemble->positions());
  CHECK(a.final_ensemble->weights() == b.final_ensemble->weights());

  cfg.seed = 18;
  const RunRecord c = run_rild(any, fitness, cfg, init);
  CHECK(a.final_ensemble->positions() != c.final_ensemble->positions());
}

TEST_CASE("resampling triggers at the configured weight ratio") {
  const AnyProblem any = AnyProblem::from_objective(quadratic(1));
  // W = -50 max(x, 0): zero on the left particle, -50 on the right one, so
  // one update at tau = 0.1 pushes the weight ratio to e^5, about 148.
  const FitnessSource fitness(
      [](const VectorXd& x) { return -50.0 * std::max(x(0), 0.0); }, 0.0);
  MatrixXd positions(1, 2);
  positions << -1.0, 1.0;
  const Ensemble init = Ensemble::with_uniform_weights(positions);

  RunConfig cfg;
  cfg.ensemble_size = 2;
  cfg.tau = 0.1;
  cfg.sigma = 0.0;
  cfg.max_iterations = 2;
  cfg.resample_threshold = 100.0;

  const RunRecord rec = run_rild_gradfree(any, fitness, cfg, init);
  CHECK(rec.trace[1].resampled);

  cfg.resample_threshold = kInfinity;
  const RunRecord keep = run_rild_gradfree(any, fitness, cfg, init);
  for (const IterationStats& row : keep.trace) CHECK_FALSE(row.resampled);
  CHECK(weight_ratio(keep.final_ensemble->weights()) > 100.0);
  CHECK(keep.final_ensemble->weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("trace row zero records the weighted initial state") {
  MatrixXd positions(1, 3);
  positions << 0.0, 1.0, 3.0;
  VectorXd weights(3);
  weights << 0.2, 0.3, 0.5;
  const Ensemble init(positions, weights);
  const AnyProblem any = AnyProblem::from_objective(quadratic(1));

  RunConfig cfg;
  cfg.ensemble_size = 3;
  cfg.max_iterations = 0;
  const RunRecord rec = run_rild(any, FitnessSource::zero(), cfg, init);
  REQUIRE(rec.trace.size() == 1);
  CHECK(rec.trace[0].mean_potential == doctest::Approx(2.4).epsilon(1e-14));
  CHECK(rec.trace[0].best_potential == 0.0);
  CHECK(rec.trace[0].evaluations == 0);
  CHECK(rec.final_ensemble->positions() == positions);
}

TEST_CASE("snapshots record the requested iterations") {
  const AnyProblem any = AnyProblem::from_objective(quadratic(2));
  const Ensemble init = gaussian_ensemble(2, 5, 0.0, 1.0, 3);
  RunConfig cfg;
  cfg.ensemble_size = 5;
  cfg.tau = 0.1;
  cfg.sigma = 0.5;
  cfg.max_iterations = 3;

  const RunRecord rec = run_rild(any, FitnessSource::zero(), cfg, init, {0, 3});
  REQUIRE(rec.snapshots.size() == 2);
  CHECK(rec.snapshots.at(0) == init.positions());
  CHECK(rec.snapshots.at(3) == rec.final_ensemble->positions());
  CHECK(rec.snapshots.at(3).rows() == 2);
  CHECK(rec.snapshots.at(3).cols() == 5);
}

TEST_CASE("divergence reports the failing iteration and keeps the partial record") {
  // Finite potential with a drift large enough to overflow one update.
  ObjectiveProblem explosive;
  explosive.dimension = 1;
  explosive.value = [](const VectorXd&) { return 0.0; };
  explosive.gradient = [](const VectorXd& x) {
    return VectorXd::Constant(1, std::abs(x(0)) > 5.0 ? 1e308 : 1.0).eval();
  };
  const AnyProblem any = AnyProblem::from_objective(explosive);
  const Ensemble init = Ensemble::with_uniform_weights(MatrixXd::Zero(1, 3));

  RunConfig cfg;
  cfg.ensemble_size = 3;
  cfg.tau = 10.0;
  cfg.sigma = 0.0;
  cfg.max_iterations = 50;

  RunRecord partial;
  try {
    run_rild(any, FitnessSource::zero(), cfg, init, {}, &partial);
    FAIL("expected a divergence");
  } catch (const DivergenceError& err) {
    // Iteration 1 moves every particle to -10; iteration 2 overflows.
    CHECK(err.iteration() == 2);
    REQUIRE(partial.trace.size() == 2);
    CHECK(partial.trace[1].iteration == 1);
    CHECK(partial.final_ensemble.has_value());
    CHECK(partial.final_ensemble->positions().allFinite());
  }
}

TEST_CASE("configuration mismatches are rejected") {
  const AnyProblem any = AnyProblem::from_objective(quadratic(2));
  const Ensemble init = gaussian_ensemble(2, 5, 0.0, 1.0, 3);
  RunConfig cfg;
  cfg.ensemble_size = 4;  // does not match init
  CHECK_THROWS_AS(run_rild(any, FitnessSource::zero(), cfg, init), ConfigError);

  cfg.ensemble_size = 5;
  cfg.drift = DriftMode::None;
  CHECK_THROWS_AS(run_rild(any, FitnessSource::zero(), cfg, init), ConfigError);

  cfg.drift = DriftMode::DerivativeFree;
  CHECK_THROWS_AS(run_rild(any, FitnessSource::zero(), cfg, init), ConfigError);

  cfg.drift = DriftMode::ExactGradient;
  const Ensemble wrong_dim = gaussian_ensemble(3, 5, 0.0, 1.0, 3);
  CHECK_THROWS_AS(run_rild(any, FitnessSource::zero(), cfg, wrong_dim), ShapeError);
}

TEST_CASE("sweeps report exact pass fractions at extreme thresholds") {
  const AnyProblem any = AnyProblem::from_objective(quadratic(2));
  const Ensemble init = gaussian_ensemble(2, 4, 1.0, 0.5, 5);
  RunConfig base;
  base.ensemble_size = 4;
  base.seed = 7;
  base.resample_threshold = kInfinity;

  const SweepResult always = pass_rate_sweep(any, FitnessSource::zero(), Algorithm::Rild,
                                             {0.1, 0.2}, {1.0, 2.0}, 3, base, 1e9, 0, init);
  REQUIRE(always.cells.size() == 4);
  CHECK(always.cells[0].tau == 0.1);
  CHECK(always.cells[0].sigma == 1.0);
  CHECK(always.cells[1].sigma == 2.0);  // sigma varies fastest
  CHECK(always.cells[2].tau == 0.2);
  for (const SweepCell& cell : always.cells) {
    CHECK(cell.trials == 3);
    CHECK(cell.passes == 3);
    CHECK(cell.rate == 1.0);
  }

  const SweepResult never = pass_rate_sweep(any, FitnessSource::zero(), Algorithm::Rild, {0.1},
                                            {1.0}, 3, base, -1.0, 100, init);
  CHECK(never.cells[0].passes == 0);
  CHECK(never.cells[0].rate == 0.0);

  CHECK_THROWS_AS(pass_rate_sweep(any, FitnessSource::zero(), Algorithm::Rild, {}, {1.0}, 3,
                                  base, 1.0, 100, init),
                  ConfigError);
  CHECK_THROWS_AS(pass_rate_sweep(any, FitnessSource::zero(), Algorithm::Rild, {0.1}, {1.0}, 0,
                                  base, 1.0, 100, init),
                  ConfigError);
}

TEST_CASE("sweep results do not depend on the thread count") {
  const AnyProblem any = AnyProblem::from_objective(quadratic(2));
  const Ensemble init = gaussian_ensemble(2, 4, 2.0, 0.5, 6);
  RunConfig base;
  base.ensemble_size = 4;
  base.seed = 12;
  base.resample_threshold = kInfinity;

  const SweepResult serial = pass_rate_sweep(any, FitnessSource::zero(), Algorithm::Gld,
                                             {0.05, 0.2}, {0.5, 2.0}, 4, base, 0.5, 60, init, 1);
  const SweepResult parallel = pass_rate_sweep(any, FitnessSource::zero(), Algorithm::Gld,
                                               {0.05, 0.2}, {0.5, 2.0}, 4, base, 0.5, 60, init,
                                               3);
  REQUIRE(serial.cells.size() == parallel.cells.size());
  for (size_t i = 0; i < serial.cells.size(); ++i) {
    CHECK(serial.cells[i].passes == parallel.cells[i].passes);
    CHECK(serial.cells[i].rate == parallel.cells[i].rate);
  }
}

}  // TEST_SUITE
