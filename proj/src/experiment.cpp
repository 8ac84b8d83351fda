#include "rild/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "rild/problems.hpp"
#include "rild/rng.hpp"
#include "rild/spectral.hpp"
#include "rild/version.hpp"

namespace rild {

namespace fs = std::filesystem;
using Eigen::VectorXd;
using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  // Shortest representation that parses back to the same double. Scanning all
  // precisions matters: %.1g renders 20 as "2e+01", %.2g as the shorter "20".
  std::string best;
  char buf[40];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v && (best.empty() || std::strlen(buf) < best.size()))
      best = buf;
  }
  return best;
}

// --- config file parsing -----------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string::size_type from = 0;
  while (true) {
    const auto at = s.find(sep, from);
    if (at == std::string::npos) {
      parts.push_back(trim(s.substr(from)));
      return parts;
    }
    parts.push_back(trim(s.substr(from, at - from)));
    from = at + 1;
  }
}

[[noreturn]] void fail_at(const std::string& path, int line, const std::string& message) {
  throw ConfigError(path + ":" + std::to_string(line) + ": " + message);
}

// Parsed key = value entries with their source lines, plus typed accessors
// that anchor every complaint to the offending line.
class ConfigMap {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  explicit ConfigMap(std::string path) : path_(std::move(path)) {}

  const std::string& path() const { return path_; }

  void insert(const std::string& key, const std::string& value, int line) {
    const auto found = entries_.find(key);
    if (found != entries_.end())
      fail_at(path_, line, "duplicate key '" + key + "' (first set on line " +
                               std::to_string(found->second.line) + ")");
    entries_[key] = {value, line};
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  const Entry* find(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  [[noreturn]] void fail_key(const std::string& key, const std::string& message) const {
    if (const Entry* e = find(key)) fail_at(path_, e->line, message);
    throw ConfigError(path_ + ": " + message);
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const Entry* e = find(key);
    return e ? e->value : fallback;
  }

  double parse_double_value(const std::string& key, const std::string& value, int line) const {
    const char* s = value.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0' || !std::isfinite(v))
      fail_at(path_, line, "key '" + key + "' expects a finite number, got '" + value + "'");
    return v;
  }

  double get_double(const std::string& key, double fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    return parse_double_value(key, e->value, e->line);
  }

  long long parse_integer_value(const std::string& key, const std::string& value,
                                int line) const {
    const char* s = value.c_str();
    char* end = nullptr;
    const long long v = std::strtoll(s, &end, 10);
    if (end == s || *end != '\0')
      fail_at(path_, line, "key '" + key + "' expects an integer, got '" + value + "'");
    return v;
  }

  long long get_integer(const std::string& key, long long fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    return parse_integer_value(key, e->value, e->line);
  }

  int get_int(const std::string& key, int fallback) const {
    return static_cast<int>(get_integer(key, fallback));
  }

  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    const std::string& value = e->value;
    const char* s = value.c_str();
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (value.empty() || value[0] == '-' || end == s || *end != '\0')
      fail_at(path_, e->line, "key '" + key + "' expects an unsigned integer, got '" + value + "'");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    if (e->value == "true") return true;
    if (e->value == "false") return false;
    fail_at(path_, e->line, "key '" + key + "' expects true or false, got '" + e->value + "'");
  }

  std::vector<double> get_double_list(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return {};
    std::vector<double> out;
    for (const std::string& item : split(e->value, ',')) {
      if (item.empty()) fail_at(path_, e->line, "key '" + key + "' has an empty list item");
      out.push_back(parse_double_value(key, item, e->line));
    }
    return out;
  }

  std::vector<int> get_int_list(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return {};
    std::vector<int> out;
    for (const std::string& item : split(e->value, ',')) {
      if (item.empty()) fail_at(path_, e->line, "key '" + key + "' has an empty list item");
      out.push_back(static_cast<int>(parse_integer_value(key, item, e->line)));
    }
    return out;
  }

 private:
  std::string path_;
  std::map<std::string, Entry> entries_;
};

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "problem",       "dim",          "ackley_a",      "ackley_b",       "ackley_c",
      "algorithm",     "ensemble",     "tau",           "sigma",          "iterations",
      "threshold",     "seed",         "covariance",    "drift",          "adaptive_tau",
      "fitness",       "fitness_scale", "fitness_bound", "init_mean",     "init_std",
      "out",           "snapshot_iters", "tau_list",    "sigma_list",     "trials",
      "budget",        "pass_threshold", "threads",     "grid",           "blend",
      "epsilon_list",  "interval"};
  return keys;
}

}  // namespace

ExperimentSpec parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");

  ConfigMap cm(path);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail_at(path, lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail_at(path, lineno, "missing key before '='");
    if (!known_keys().count(key)) fail_at(path, lineno, "unknown key '" + key + "'");
    if (value.empty()) fail_at(path, lineno, "missing value for key '" + key + "'");
    cm.insert(key, value, lineno);
  }

  ExperimentSpec spec;

  spec.problem = cm.get_string("problem", "ackley");
  if (spec.problem != "ackley" && spec.problem != "elliptic" && spec.problem != "rosenbrock")
    cm.fail_key("problem", "unknown problem '" + spec.problem +
                               "' (expected ackley | elliptic | rosenbrock)");

  const int default_dim = spec.problem == "ackley" ? 100 : spec.problem == "rosenbrock" ? 20 : 2;
  spec.dimension = cm.get_int("dim", default_dim);
  if (spec.dimension < 1) cm.fail_key("dim", "dim must be positive");
  if (spec.problem == "elliptic" && spec.dimension != 2)
    cm.fail_key("dim", "the elliptic problem is two dimensional");
  if (spec.problem == "rosenbrock" && spec.dimension < 2)
    cm.fail_key("dim", "the rosenbrock problem needs dim >= 2");

  spec.ackley_a = cm.get_double("ackley_a", spec.ackley_a);
  spec.ackley_b = cm.get_double("ackley_b", spec.ackley_b);
  spec.ackley_c = cm.get_double("ackley_c", spec.ackley_c);

  const std::string algorithm = cm.get_string("algorithm", "rild");
  try {
    spec.algorithm = algorithm_from_name(algorithm);
  } catch (const ConfigError&) {
    cm.fail_key("algorithm", "unknown algorithm '" + algorithm +
                                 "' (expected rild | rild_gradfree | gld | eks | eki)");
  }

  spec.ensemble_size = cm.get_int("ensemble", spec.ensemble_size);
  if (spec.ensemble_size < 1) cm.fail_key("ensemble", "ensemble must be positive");
  spec.tau = cm.get_double("tau", spec.tau);
  if (!(spec.tau > 0.0)) cm.fail_key("tau", "tau must be positive");
  spec.sigma = cm.get_double("sigma", spec.sigma);
  if (spec.sigma < 0.0) cm.fail_key("sigma", "sigma must be nonnegative");
  spec.iterations = cm.get_int("iterations", spec.iterations);
  if (spec.iterations < 0) cm.fail_key("iterations", "iterations must be nonnegative");

  if (const ConfigMap::Entry* e = cm.find("threshold")) {
    if (e->value == "inf" || e->value == "infinity") {
      spec.resample_threshold = kInfinity;
    } else {
      spec.resample_threshold = cm.parse_double_value("threshold", e->value, e->line);
      if (!(spec.resample_threshold > 1.0))
        cm.fail_key("threshold", "threshold must exceed 1 (or be 'inf')");
    }
  }

  spec.seed = cm.get_seed("seed", spec.seed);

  const std::string covariance = cm.get_string("covariance", "identity");
  if (covariance == "identity")
    spec.covariance = CovarianceMode::Identity;
  else if (covariance == "weighted")
    spec.covariance = CovarianceMode::Weighted;
  else
    cm.fail_key("covariance",
                "unknown covariance '" + covariance + "' (expected identity | weighted)");

  const std::string drift = cm.get_string("drift", "gradient");
  if (drift == "gradient")
    spec.drift = DriftMode::ExactGradient;
  else if (drift == "derivative-free")
    spec.drift = DriftMode::DerivativeFree;
  else
    cm.fail_key("drift", "unknown drift '" + drift + "' (expected gradient | derivative-free)");

  spec.adaptive_tau = cm.get_bool("adaptive_tau", spec.adaptive_tau);

  const bool reweighted =
      spec.algorithm == Algorithm::Rild || spec.algorithm == Algorithm::RildGradFree;
  spec.fitness = cm.get_string("fitness", reweighted ? "negV" : "none");
  if (spec.fitness != "none" && spec.fitness != "negV" && spec.fitness != "negMisfit" &&
      spec.fitness != "scaledNegMisfit")
    cm.fail_key("fitness", "unknown fitness '" + spec.fitness +
                               "' (expected none | negV | negMisfit | scaledNegMisfit)");
  spec.fitness_scale = cm.get_double("fitness_scale", spec.fitness_scale);
  if (!(spec.fitness_scale > 0.0)) cm.fail_key("fitness_scale", "fitness_scale must be positive");
  spec.fitness_bound = cm.get_double("fitness_bound", spec.fitness_bound);

  if (cm.has("init_mean")) spec.init_mean = cm.get_double("init_mean", 0.0);
  if (cm.has("init_std")) {
    spec.init_std = cm.get_double("init_std", 0.0);
    if (!(*spec.init_std > 0.0)) cm.fail_key("init_std", "init_std must be positive");
  }

  spec.out_dir = cm.get_string("out", spec.out_dir);
  spec.snapshot_iterations = cm.get_int_list("snapshot_iters");
  for (int iter : spec.snapshot_iterations)
    if (iter < 0) cm.fail_key("snapshot_iters", "snapshot iterations must be nonnegative");

  spec.tau_list = cm.get_double_list("tau_list");
  for (double t : spec.tau_list)
    if (!(t > 0.0)) cm.fail_key("tau_list", "tau_list entries must be positive");
  spec.sigma_list = cm.get_double_list("sigma_list");
  for (double s : spec.sigma_list)
    if (s < 0.0) cm.fail_key("sigma_list", "sigma_list entries must be nonnegative");

  spec.trials = cm.get_int("trials", spec.trials);
  if (spec.trials < 1) cm.fail_key("trials", "trials must be positive");
  spec.eval_budget = static_cast<long>(cm.get_integer("budget", spec.eval_budget));
  if (spec.eval_budget < 0) cm.fail_key("budget", "budget must be nonnegative");
  spec.pass_threshold = cm.get_double("pass_threshold", spec.pass_threshold);
  spec.threads = cm.get_int("threads", spec.threads);
  if (spec.threads < 1) cm.fail_key("threads", "threads must be positive");

  spec.grid_size = cm.get_int("grid", spec.grid_size);
  if (spec.grid_size < 16 || spec.grid_size % 2 != 0)
    cm.fail_key("grid", "grid must be an even integer of at least 16");
  spec.blend_width = cm.get_double("blend", spec.blend_width);
  if (!(spec.blend_width > 0.0) || !(spec.blend_width < 0.1))
    cm.fail_key("blend", "blend must lie in (0, 0.1)");

  spec.epsilon_list = cm.get_double_list("epsilon_list");
  for (size_t k = 0; k < spec.epsilon_list.size(); ++k) {
    if (spec.epsilon_list[k] < 0.0)
      cm.fail_key("epsilon_list", "epsilon_list entries must be nonnegative");
    if (k > 0 && spec.epsilon_list[k] <= spec.epsilon_list[k - 1])
      cm.fail_key("epsilon_list", "epsilon_list must be strictly ascending");
  }

  if (const ConfigMap::Entry* e = cm.find("interval")) {
    const std::vector<std::string> parts = split(e->value, ',');
    if (parts.size() != 2) fail_at(path, e->line, "interval expects 'lo,hi'");
    spec.interval_lo = cm.parse_double_value("interval", parts[0], e->line);
    spec.interval_hi = cm.parse_double_value("interval", parts[1], e->line);
    if (!(0.0 <= spec.interval_lo) || !(spec.interval_lo < spec.interval_hi) ||
        !(spec.interval_hi <= 1.0))
      fail_at(path, e->line, "interval must satisfy 0 <= lo < hi <= 1");
  }

  return spec;
}

// --- spec -> runnable pieces ---------------------------------------------------

RunConfig run_config_from_spec(const ExperimentSpec& spec) {
  RunConfig cfg;
  cfg.ensemble_size = spec.ensemble_size;
  cfg.tau = spec.tau;
  cfg.sigma = spec.sigma;
  cfg.max_iterations = spec.iterations;
  cfg.resample_threshold = spec.resample_threshold;
  cfg.seed = spec.seed;
  cfg.covariance = spec.covariance;
  cfg.drift = spec.drift;
  cfg.adaptive_tau = spec.adaptive_tau;
  return cfg;
}

AnyProblem make_problem(const ExperimentSpec& spec) {
  if (spec.problem == "ackley")
    return AnyProblem::from_objective(
        ackley_problem(spec.dimension, spec.ackley_a, spec.ackley_b, spec.ackley_c));
  if (spec.problem == "elliptic") return AnyProblem::from_least_squares(elliptic_bvp_problem());
  if (spec.problem == "rosenbrock")
    return AnyProblem::from_least_squares(rosenbrock_map_problem(spec.dimension));
  throw ConfigError("unknown problem '" + spec.problem + "'");
}

FitnessSource make_fitness(const ExperimentSpec& spec, const AnyProblem& problem) {
  if (spec.fitness == "none") return FitnessSource::zero();
  if (spec.fitness == "negV") {
    const ObjectiveProblem objective = problem.objective;
    return FitnessSource(
        [objective](const VectorXd& x) { return -objective.evaluate(x); },
        spec.fitness_bound, "negV");
  }
  if (spec.fitness == "negMisfit") {
    if (!problem.least_squares)
      throw ConfigError("fitness negMisfit needs an inverse-problem formulation; problem '" +
                        spec.problem + "' has none");
    const LeastSquaresProblem lsq = *problem.least_squares;
    return FitnessSource([lsq](const VectorXd& x) { return -lsq.misfit(x); }, spec.fitness_bound,
                         "negMisfit");
  }
  if (spec.fitness == "scaledNegMisfit") {
    if (!problem.least_squares)
      throw ConfigError("fitness scaledNegMisfit needs an inverse-problem formulation; problem '" +
                        spec.problem + "' has none");
    const LeastSquaresProblem lsq = *problem.least_squares;
    const double scale = spec.fitness_scale;
    return FitnessSource(
        [lsq, scale](const VectorXd& x) {
          return -scale * (lsq.forward(x) - lsq.data()).squaredNorm();
        },
        spec.fitness_bound, "scaledNegMisfit");
  }
  throw ConfigError("unknown fitness '" + spec.fitness + "'");
}

Ensemble make_initial_ensemble(const ExperimentSpec& spec) {
  return default_initial_ensemble(spec.problem, spec.dimension, spec.ensemble_size, spec.seed,
                                  spec.init_mean, spec.init_std);
}

// --- output rendering ----------------------------------------------------------

namespace {

std::string join_doubles(const std::vector<double>& values) {
  if (values.empty()) return "none";
  std::string out;
  for (size_t k = 0; k < values.size(); ++k) {
    if (k) out += ",";
    out += format_double(values[k]);
  }
  return out;
}

std::string join_ints(const std::vector<int>& values) {
  if (values.empty()) return "none";
  std::string out;
  for (size_t k = 0; k < values.size(); ++k) {
    if (k) out += ",";
    out += std::to_string(values[k]);
  }
  return out;
}

}  // namespace

std::string resolved_config_line(const ExperimentSpec& spec, const std::string& mode) {
  std::vector<std::string> parts;
  const auto add = [&](const std::string& key, const std::string& value) {
    parts.push_back(key + "=" + value);
  };
  add("mode", mode);
  if (mode == "spectral") {
    add("grid", std::to_string(spec.grid_size));
    add("blend", format_double(spec.blend_width));
    add("epsilon_list", join_doubles(spec.epsilon_list));
    add("sigma_list", join_doubles(spec.sigma_list));
    add("interval", format_double(spec.interval_lo) + "," + format_double(spec.interval_hi));
  } else {
    add("problem", spec.problem);
    add("dim", std::to_string(spec.dimension));
    if (spec.problem == "ackley") {
      add("ackley_a", format_double(spec.ackley_a));
      add("ackley_b", format_double(spec.ackley_b));
      add("ackley_c", format_double(spec.ackley_c));
    }
    add("algorithm", algorithm_name(spec.algorithm));
    add("ensemble", std::to_string(spec.ensemble_size));
    if (mode == "run") {
      add("tau", format_double(spec.tau));
      add("sigma", format_double(spec.sigma));
      add("iterations", std::to_string(spec.iterations));
    }
    add("threshold", format_double(spec.resample_threshold));
    add("covariance", spec.covariance == CovarianceMode::Weighted ? "weighted" : "identity");
    add("drift", spec.drift == DriftMode::DerivativeFree ? "derivative-free" : "gradient");
    add("adaptive_tau", spec.adaptive_tau ? "true" : "false");
    add("fitness", spec.fitness);
    add("fitness_scale", format_double(spec.fitness_scale));
    add("fitness_bound", format_double(spec.fitness_bound));
    add("init_mean", spec.init_mean ? format_double(*spec.init_mean) : "default");
    add("init_std", spec.init_std ? format_double(*spec.init_std) : "default");
    if (mode == "run") add("snapshot_iters", join_ints(spec.snapshot_iterations));
    if (mode == "sweep") {
      add("tau_list", join_doubles(spec.tau_list));
      add("sigma_list", join_doubles(spec.sigma_list));
      add("trials", std::to_string(spec.trials));
      add("budget", std::to_string(spec.eval_budget));
      add("pass_threshold", format_double(spec.pass_threshold));
    }
  }
  std::string line;
  for (size_t k = 0; k < parts.size(); ++k) {
    if (k) line += " ";
    line += parts[k];
  }
  return line;
}

namespace {

std::string file_preamble(const ExperimentSpec& spec, const std::string& mode) {
  return std::string("# rild ") + kVersion + "\n# seed=" + std::to_string(spec.seed) +
         "\n# config: " + resolved_config_line(spec, mode) + "\n";
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file " + path.string());
  out << content;
  out.flush();
  if (!out) throw Error("failed while writing " + path.string());
}

std::string render_trace(const ExperimentSpec& spec, const std::string& mode,
                         const RunRecord& rec) {
  std::string s = file_preamble(spec, mode);
  s += "iter,mean_V,best_V,evals,tau,resampled\n";
  for (const IterationStats& row : rec.trace) {
    s += std::to_string(row.iteration) + "," + format_double(row.mean_potential) + "," +
         format_double(row.best_potential) + "," + std::to_string(row.evaluations) + "," +
         format_double(row.tau) + "," + (row.resampled ? "1" : "0") + "\n";
  }
  return s;
}

std::string render_ensemble(const ExperimentSpec& spec, const std::string& mode,
                            const Eigen::MatrixXd& positions) {
  std::string s = file_preamble(spec, mode);
  const int dimension = static_cast<int>(positions.rows());
  const int count = static_cast<int>(positions.cols());
  for (int i = 0; i < dimension; ++i) {
    if (i) s += ",";
    s += "x" + std::to_string(i);
  }
  s += "\n";
  for (int j = 0; j < count; ++j) {
    for (int i = 0; i < dimension; ++i) {
      if (i) s += ",";
      s += format_double(positions(i, j));
    }
    s += "\n";
  }
  return s;
}

json base_meta(const ExperimentSpec& spec, const std::string& mode, double wall_seconds) {
  json meta;
  meta["version"] = kVersion;
  meta["mode"] = mode;
  meta["seed"] = spec.seed;
  meta["config"] = resolved_config_line(spec, mode);
  meta["wall_time_seconds"] = wall_seconds;
  return meta;
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

// --- run mode --------------------------------------------------------------------

int run_experiment(const ExperimentSpec& spec) {
  const auto start = std::chrono::steady_clock::now();
  const AnyProblem problem = make_problem(spec);
  const RunConfig cfg = run_config_from_spec(spec);
  const FitnessSource fitness = make_fitness(spec, problem);

  const fs::path dir(spec.out_dir);
  fs::create_directories(dir);

  RunRecord rec;
  RunRecord partial;
  bool failed = false;
  bool diverged = false;
  int divergence_iteration = -1;
  std::string error_message;
  try {
    switch (spec.algorithm) {
      case Algorithm::Rild:
        rec = run_rild(problem, fitness, cfg, make_initial_ensemble(spec),
                       spec.snapshot_iterations, &partial);
        break;
      case Algorithm::RildGradFree:
        rec = run_rild_gradfree(problem, fitness, cfg, make_initial_ensemble(spec),
                                spec.snapshot_iterations, &partial);
        break;
      case Algorithm::Gld: {
        const Ensemble init = make_initial_ensemble(spec);
        RngStream pick(cfg.seed, static_cast<std::uint64_t>(init.size()) + 1);
        const int index =
            std::min(init.size() - 1, static_cast<int>(pick.uniform01() * init.size()));
        rec = run_gld(problem.objective, cfg, init.positions().col(index), 0,
                      spec.snapshot_iterations, &partial);
        break;
      }
      case Algorithm::Eks:
        if (!problem.least_squares)
          throw ConfigError("eks needs an inverse-problem formulation; problem '" + spec.problem +
                            "' has none");
        rec = run_eks(*problem.least_squares, cfg, make_initial_ensemble(spec),
                      spec.snapshot_iterations, &partial);
        break;
      case Algorithm::Eki:
        if (!problem.least_squares)
          throw ConfigError("eki needs an inverse-problem formulation; problem '" + spec.problem +
                            "' has none");
        rec = run_eki(*problem.least_squares, cfg, make_initial_ensemble(spec),
                      spec.snapshot_iterations, &partial);
        break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const DivergenceError& e) {
    failed = true;
    diverged = true;
    divergence_iteration = e.iteration();
    error_message = e.what();
    rec = partial;
  } catch (const Error& e) {
    failed = true;
    error_message = e.what();
    rec = partial;
  }

  write_file(dir / "trace.csv", render_trace(spec, "run", rec));
  for (const auto& [iteration, positions] : rec.snapshots)
    write_file(dir / ("ensemble_" + std::to_string(iteration) + ".csv"),
               render_ensemble(spec, "run", positions));

  json meta = base_meta(spec, "run", seconds_since(start));
  meta["algorithm"] = algorithm_name(spec.algorithm);
  meta["fitness"] = spec.fitness;
  meta["threshold"] = format_double(spec.resample_threshold);
  meta["iterations_completed"] = rec.trace.empty() ? 0 : rec.trace.back().iteration;
  meta["evaluations"] = rec.trace.empty() ? 0L : rec.trace.back().evaluations;
  if (!rec.trace.empty()) meta["best_potential"] = rec.trace.back().best_potential;
  meta["diverged"] = diverged;
  if (diverged) meta["divergence_iteration"] = divergence_iteration;
  if (failed) meta["error"] = error_message;
  if (spec.adaptive_tau) meta["adaptive_tau_rule"] = "frobenius-normalized-v1";
  write_file(dir / "meta.json", meta.dump(2) + "\n");

  if (failed) {
    std::cerr << "run failed: " << error_message << "\n";
    return 3;
  }
  std::cout << "wrote " << (dir / "trace.csv").string() << " ("
            << (rec.trace.empty() ? 0 : rec.trace.back().iteration) << " iterations)\n";
  return 0;
}

// --- sweep mode --------------------------------------------------------------------

int run_sweep_experiment(const ExperimentSpec& spec) {
  if (spec.tau_list.empty()) throw ConfigError("sweep mode needs a tau_list");
  if (spec.sigma_list.empty()) throw ConfigError("sweep mode needs a sigma_list");
  const auto start = std::chrono::steady_clock::now();
  const AnyProblem problem = make_problem(spec);
  const FitnessSource fitness = make_fitness(spec, problem);
  const RunConfig base = run_config_from_spec(spec);
  const Ensemble init = make_initial_ensemble(spec);

  const SweepResult result =
      pass_rate_sweep(problem, fitness, spec.algorithm, spec.tau_list, spec.sigma_list,
                      spec.trials, base, spec.pass_threshold, spec.eval_budget, init,
                      spec.threads);

  const fs::path dir(spec.out_dir);
  fs::create_directories(dir);

  std::string csv = file_preamble(spec, "sweep");
  csv += "tau,sigma,trials,passes,rate\n";
  for (const SweepCell& cell : result.cells)
    csv += format_double(cell.tau) + "," + format_double(cell.sigma) + "," +
           std::to_string(cell.trials) + "," + std::to_string(cell.passes) + "," +
           format_double(cell.rate) + "\n";
  write_file(dir / "passrate.csv", csv);

  json meta = base_meta(spec, "sweep", seconds_since(start));
  meta["algorithm"] = algorithm_name(spec.algorithm);
  meta["fitness"] = spec.fitness;
  meta["cells"] = result.cells.size();
  meta["trials_per_cell"] = spec.trials;
  if (spec.adaptive_tau) meta["adaptive_tau_rule"] = "frobenius-normalized-v1";
  write_file(dir / "meta.json", meta.dump(2) + "\n");

  std::cout << "wrote " << (dir / "passrate.csv").string() << " (" << result.cells.size()
            << " cells)\n";
  return 0;
}

// --- spectral mode -------------------------------------------------------------------

int run_spectral_experiment(const ExperimentSpec& spec_in) {
  ExperimentSpec spec = spec_in;
  if (spec.epsilon_list.empty()) spec.epsilon_list = {0.0, 0.02, 0.04, 0.06, 0.08, 0.1};
  if (spec.sigma_list.empty()) spec.sigma_list = {1.0, 0.5, 0.25, 0.125};
  for (double sigma : spec.sigma_list)
    if (!(sigma > 0.0)) throw ConfigError("sigma_list entries must be positive in spectral mode");

  const auto start = std::chrono::steady_clock::now();
  const PeriodicGrid grid(spec.grid_size);
  const VectorXd v = smooth_periodize(grid, cosine_mix_potential, spec.blend_width);
  const VectorXd x = grid.nodes();

  const fs::path dir(spec.out_dir);
  fs::create_directories(dir);
  const std::string preamble = file_preamble(spec, "spectral");

  const auto render_curve = [&](const VectorXd& values, const char* column) {
    std::string s = preamble + "x," + column + "\n";
    for (int m = 0; m < grid.size; ++m)
      s += format_double(x(m)) + "," + format_double(values(m)) + "\n";
    return s;
  };

  try {
    // Reweighted generator: principal density and gap versus epsilon.
    const std::vector<EigenPair> base_pairs =
        leading_eigenpairs(assemble_langevin_operator(grid, v, 0.0), 1);
    const VectorXd base_density = base_pairs[0].function;

    std::string gap_csv = preamble + "param,lambda0,lambda1,gap\n";
    for (double epsilon : spec.epsilon_list) {
      const OperatorMatrix op = assemble_langevin_operator(grid, v, epsilon);
      const std::vector<EigenPair> pairs = leading_eigenpairs(op, 2);
      const double lambda0 = pairs[0].value.real();
      const double lambda1 = pairs[1].value.real();
      gap_csv += format_double(epsilon) + "," + format_double(lambda0) + "," +
                 format_double(lambda1) + "," + format_double(lambda0 - lambda1) + "\n";
      const std::string tag = format_double(epsilon);
      write_file(dir / ("eigfun_eps_" + tag + ".csv"),
                 render_curve(pairs[0].function, "eigfun_value"));
      write_file(dir / ("quotient_eps_" + tag + ".csv"),
                 render_curve(pairs[0].function.cwiseQuotient(base_density), "quotient"));
    }
    write_file(dir / "spectral_gap.csv", gap_csv);

    // Diffusion-plus-source operator: concentration versus sigma.
    std::string sigma_csv = preamble + "param,lambda0,lambda1,gap\n";
    std::string concentration_csv = preamble + "sigma,mass_ratio\n";
    for (double sigma : spec.sigma_list) {
      const OperatorMatrix op = assemble_diffusion_source_operator(grid, -v, sigma);
      const std::vector<EigenPair> pairs = leading_eigenpairs(op, 2);
      const double lambda0 = pairs[0].value.real();
      const double lambda1 = pairs[1].value.real();
      sigma_csv += format_double(sigma) + "," + format_double(lambda0) + "," +
                   format_double(lambda1) + "," + format_double(lambda0 - lambda1) + "\n";
      const double mass =
          mass_concentration(pairs[0].function, spec.interval_lo, spec.interval_hi);
      concentration_csv += format_double(sigma) + "," + format_double(mass) + "\n";
      write_file(dir / ("eigfun_sigma_" + format_double(sigma) + ".csv"),
                 render_curve(pairs[0].function, "eigfun_value"));
    }
    write_file(dir / "spectral_sigma.csv", sigma_csv);
    write_file(dir / "concentration.csv", concentration_csv);
  } catch (const NumericalError& e) {
    json meta = base_meta(spec, "spectral", seconds_since(start));
    meta["error"] = e.what();
    write_file(dir / "meta.json", meta.dump(2) + "\n");
    std::cerr << "spectral run failed: " << e.what() << "\n";
    return 3;
  }

  json meta = base_meta(spec, "spectral", seconds_since(start));
  meta["epsilon_count"] = spec.epsilon_list.size();
  meta["sigma_count"] = spec.sigma_list.size();
  write_file(dir / "meta.json", meta.dump(2) + "\n");

  std::cout << "wrote " << (dir / "spectral_gap.csv").string() << " and "
            << (dir / "concentration.csv").string() << "\n";
  return 0;
}

// --- command line --------------------------------------------------------------------

namespace {

std::vector<int> parse_snapshot_flag(const std::string& value) {
  std::vector<int> out;
  for (const std::string& item : split(value, ',')) {
    if (item.empty()) throw ConfigError("--snapshot-iters has an empty list item");
    char* end = nullptr;
    const long v = std::strtol(item.c_str(), &end, 10);
    if (end == item.c_str() || *end != '\0' || v < 0)
      throw ConfigError("--snapshot-iters expects nonnegative integers, got '" + item + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"interacting Langevin experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string snapshot_list;
  std::uint64_t seed = 0;
  int threads = 1;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides the config)");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads (overrides the config)");
    sub->add_option("--snapshot-iters", snapshot_list,
                    "comma separated snapshot iterations (overrides the config)");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run one experiment and write trace files");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "pass-rate sweep over a tau/sigma grid");
  CLI::App* spectral_cmd = app.add_subcommand("spectral", "spectral gap and concentration curves");
  add_common(run_cmd);
  add_common(sweep_cmd);
  add_common(spectral_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    ExperimentSpec spec = parse_config(config_path);
    CLI::App* active = app.get_subcommands().front();
    if (active->count("--out")) spec.out_dir = out_dir;
    if (active->count("--seed")) spec.seed = seed;
    if (active->count("--threads")) {
      if (threads < 1) throw ConfigError("--threads must be at least 1");
      spec.threads = threads;
    }
    if (active->count("--snapshot-iters"))
      spec.snapshot_iterations = parse_snapshot_flag(snapshot_list);

    if (active == run_cmd) return run_experiment(spec);
    if (active == sweep_cmd) return run_sweep_experiment(spec);
    return run_spectral_experiment(spec);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace rild
