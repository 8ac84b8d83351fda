#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace rild {

// One round of the splitmix64 output function. Used to derive sub-seeds.
std::uint64_t splitmix64(std::uint64_t x);

// Deterministically combines a master seed with a salt (stream index, trial
// index, ...) into an independent-looking seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

// A deterministic random stream addressed by (seed, stream_index).
//
// Contract: the n-th value drawn from RngStream(seed, k) is a pure function
// of (seed, k, n). Streams never share state, so interleaving draws from
// different streams (or running them on different threads) cannot change the
// values any one stream produces. Gaussians come from a hand-rolled
// Box-Muller transform rather than std::normal_distribution so the mapping
// from engine output to values is fixed by this file alone.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_index);

  // Standard normal draw.
  double normal();

  // Vector of n independent standard normals.
  Eigen::VectorXd normal_vector(Eigen::Index n);

  // Uniform draw in [0, 1).
  double uniform01();

  std::uint64_t stream_index() const { return stream_; }

 private:
  double next_uniform_open();  // (0, 1], safe as a log argument

  std::mt19937_64 engine_;
  std::uint64_t stream_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace rild
