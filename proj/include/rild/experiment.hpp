#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rild/algorithms.hpp"
#include "rild/core.hpp"

namespace rild {

// Declarative description of one experiment, parsed from a `key = value`
// config file. Defaults are documented in the README; parse_config fills
// them and rejects unknown or duplicated keys with file:line anchored
// ConfigError messages.
struct ExperimentSpec {
  // problem selection
  std::string problem = "ackley";
  int dimension = 100;  // per-problem default filled at parse time
  double ackley_a = 20.0;
  double ackley_b = 0.2;
  double ackley_c = 2.0 * M_PI;

  // algorithm and dynamics
  Algorithm algorithm = Algorithm::Rild;
  int ensemble_size = 50;
  double tau = 0.1;
  double sigma = 1.0;
  int iterations = 100;
  double resample_threshold = 1e3;  // "inf" in the file disables resampling
  std::uint64_t seed = 0;
  CovarianceMode covariance = CovarianceMode::Identity;
  DriftMode drift = DriftMode::ExactGradient;
  bool adaptive_tau = false;

  // reweighting fitness: none | negV | negMisfit | scaledNegMisfit
  std::string fitness = "negV";  // per-algorithm default filled at parse time
  double fitness_scale = 5e-3;   // scale c of scaledNegMisfit
  double fitness_bound = 0.0;    // declared upper bound of the fitness

  // initial ensemble overrides (Gaussian families only)
  std::optional<double> init_mean;
  std::optional<double> init_std;

  // output
  std::string out_dir = "out";
  std::vector<int> snapshot_iterations;

  // sweep mode
  std::vector<double> tau_list;
  std::vector<double> sigma_list;
  int trials = 10;
  long eval_budget = 50000;
  double pass_threshold = 17.0;
  int threads = 1;

  // spectral mode
  int grid_size = 256;
  double blend_width = 0.02;
  std::vector<double> epsilon_list;  // default {0, 0.02, ..., 0.1} at run time
  double interval_lo = 0.44;
  double interval_hi = 0.68;
};

// Parses and validates a config file. ConfigError messages carry
// "path:line:" prefixes for every schema violation.
ExperimentSpec parse_config(const std::string& path);

// Pieces the CLI assembles; exposed so tests exercise exactly what runs.
RunConfig run_config_from_spec(const ExperimentSpec& spec);
AnyProblem make_problem(const ExperimentSpec& spec);
FitnessSource make_fitness(const ExperimentSpec& spec, const AnyProblem& problem);
Ensemble make_initial_ensemble(const ExperimentSpec& spec);

// Canonical single-line echo of the resolved settings for the given mode;
// embedded in every output file so equal configs imply byte-equal outputs.
std::string resolved_config_line(const ExperimentSpec& spec, const std::string& mode);

// Shortest decimal representation of v that parses back to exactly v.
std::string format_double(double v);

// Experiment drivers. Each writes its files under spec.out_dir and returns
// a process exit code: 0 on success, 3 on numerical failure (with partial
// outputs and metadata kept). Config problems throw ConfigError.
int run_experiment(const ExperimentSpec& spec);
int run_sweep_experiment(const ExperimentSpec& spec);
int run_spectral_experiment(const ExperimentSpec& spec);

// Full command-line entry point (subcommands run | sweep | spectral).
int cli_main(int argc, char** argv);

}  // namespace rild
