#include "rild/rng.hpp"

#include <cmath>

namespace rild {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed + 0x9E3779B97F4A7C15ull * (salt + 1));
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_index)
    : engine_(mix_seed(seed, stream_index)), stream_(stream_index) {}

double RngStream::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1p-53;
}

double RngStream::next_uniform_open() {
  return static_cast<double>((engine_() >> 11) + 1) * 0x1p-53;
}

double RngStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  const double u1 = next_uniform_open();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(angle);
  has_cached_ = true;
  return r * std::cos(angle);
}

Eigen::VectorXd RngStream::normal_vector(Eigen::Index n) {
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = normal();
  return out;
}

}  // namespace rild
