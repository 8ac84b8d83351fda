#include "rild/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace rild {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

PeriodicGrid::PeriodicGrid(int m) : size(m) {
  if (m < 16 || m % 2 != 0)
    throw std::invalid_argument("periodic grid size must be even and at least 16");
}

VectorXd PeriodicGrid::nodes() const {
  VectorXd x(size);
  for (int m = 0; m < size; ++m) x(m) = node(m);
  return x;
}

MatrixXd fourier_differentiation_matrix(const PeriodicGrid& grid, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("differentiation order must be 1 or 2");
  const int m = grid.size;
  const std::complex<double> i2pi(0.0, 2.0 * M_PI);
  MatrixXcd dft(m, m);
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j)
      dft(k, j) = std::exp(-i2pi * (static_cast<double>(k) * j / static_cast<double>(m)));
  VectorXcd multiplier(m);
  for (int k = 0; k < m; ++k) {
    const int freq = k <= m / 2 ? k : k - m;
    if (order == 1)
      multiplier(k) = k == m / 2 ? 0.0 : i2pi * static_cast<double>(freq);
    else
      multiplier(k) = -std::pow(2.0 * M_PI * freq, 2);
  }
  const MatrixXcd derivative =
      (dft.adjoint() * multiplier.asDiagonal() * dft) / static_cast<double>(m);
  return derivative.real();
}

namespace {

// exp(-1/t) for t > 0, else 0; the standard C-infinity transition kernel.
double bump_half(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

// Smooth step: 0 for t <= 0, 1 for t >= 1.
double smooth_step(double t) {
  const double a = bump_half(t);
  const double b = bump_half(1.0 - t);
  return a / (a + b);
}

}  // namespace

PeriodizedPotential::PeriodizedPotential(std::function<double(double)> raw, double blend_width)
    : raw_(std::move(raw)), blend_(blend_width) {
  if (!raw_) throw std::invalid_argument("periodization needs a potential");
  if (!(blend_ > 0.0) || !(blend_ < 0.1))
    throw std::invalid_argument("blend width must lie in (0, 0.1)");
  base_ = raw_(0.0);
}

double PeriodizedPotential::operator()(double x) const {
  // s vanishes smoothly at both ends of [0, 1] and equals 1 on the interior
  // plateau, so the blended value agrees with raw(0) at the seam.
  const double s = smooth_step(x / blend_) * smooth_step((1.0 - x) / blend_);
  return s * raw_(x) + (1.0 - s) * base_;
}

VectorXd smooth_periodize(const PeriodicGrid& grid, const std::function<double(double)>& raw,
                          double blend_width) {
  const PeriodizedPotential p(raw, blend_width);
  VectorXd out(grid.size);
  for (int m = 0; m < grid.size; ++m) out(m) = p(grid.node(m));
  return out;
}

double cosine_mix_potential(double x) {
  return std::cos(9.0 * M_PI * x) - std::cos(11.0 * M_PI * x);
}

OperatorMatrix assemble_langevin_operator(const PeriodicGrid& grid, const VectorXd& v_samples,
                                          double epsilon) {
  if (v_samples.size() != grid.size) throw ShapeError("potential samples do not match grid");
  const MatrixXd d1 = fourier_differentiation_matrix(grid, 1);
  const MatrixXd d2 = fourier_differentiation_matrix(grid, 2);
  const VectorXd v_prime = d1 * v_samples;
  MatrixXd op = d2 - v_prime.asDiagonal() * d1;
  if (epsilon != 0.0) op -= epsilon * MatrixXd(v_samples.asDiagonal());
  return {std::move(op), "langevin", epsilon, grid.size};
}

OperatorMatrix assemble_diffusion_source_operator(const PeriodicGrid& grid,
                                                  const VectorXd& w_samples, double sigma) {
  if (w_samples.size() != grid.size) throw ShapeError("source samples do not match grid");
  if (!(sigma > 0.0)) throw std::invalid_argument("diffusion strength must be positive");
  const MatrixXd d2 = fourier_differentiation_matrix(grid, 2);
  MatrixXd op = 0.5 * sigma * sigma * d2;
  op += MatrixXd(w_samples.asDiagonal());
  return {std::move(op), "diffusion_source", sigma, grid.size};
}

std::vector<EigenPair> leading_eigenpairs(const OperatorMatrix& op, int count) {
  const int m = op.grid_size;
  if (count < 1 || count > m) throw ShapeError("eigenpair count out of range");
  // Eigenvalues of a matrix and its transpose coincide; taking eigenvectors
  // of the transpose selects the density side of a non-symmetric generator.
  Eigen::EigenSolver<MatrixXd> solver(op.matrix.transpose());
  if (solver.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
  const VectorXcd values = solver.eigenvalues();
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values(a).real() > values(b).real(); });
  std::vector<EigenPair> pairs;
  pairs.reserve(count);
  for (int r = 0; r < count; ++r) {
    const int idx = order[static_cast<size_t>(r)];
    EigenPair pair;
    pair.value = values(idx);
    VectorXd fn = solver.eigenvectors().col(idx).real();
    if (fn.norm() == 0.0) fn = solver.eigenvectors().col(idx).imag();
    if (fn.mean() < 0.0) fn = -fn;
    const double l1 = fn.cwiseAbs().sum() / static_cast<double>(m);
    if (l1 > 0.0) fn /= l1;
    pair.function = std::move(fn);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<GapPoint> spectral_gap_curve(const PeriodicGrid& grid, const VectorXd& v_samples,
                                         const std::vector<double>& epsilon_list) {
  if (epsilon_list.empty()) throw std::invalid_argument("epsilon list must be nonempty");
  std::vector<GapPoint> curve;
  curve.reserve(epsilon_list.size());
  for (double eps : epsilon_list) {
    const OperatorMatrix op = assemble_langevin_operator(grid, v_samples, eps);
    const std::vector<EigenPair> pairs = leading_eigenpairs(op, 2);
    GapPoint point;
    point.parameter = eps;
    point.lambda0 = pairs[0].value.real();
    point.lambda1 = pairs[1].value.real();
    point.gap = point.lambda0 - point.lambda1;
    curve.push_back(point);
  }
  return curve;
}

double mass_concentration(const VectorXd& eigenfunction, double lo, double hi) {
  const int m = static_cast<int>(eigenfunction.size());
  if (m < 2) throw ShapeError("eigenfunction needs at least two samples");
  if (!(0.0 <= lo) || !(lo < hi) || !(hi <= 1.0))
    throw std::invalid_argument("interval must satisfy 0 <= lo < hi <= 1");
  const double total = eigenfunction.sum() / static_cast<double>(m);
  if (!(total > 0.0)) throw std::invalid_argument("eigenfunction must carry positive mass");

  // Piecewise-linear periodic interpolant, integrated exactly per cell.
  auto value_at = [&](double x) {
    const double t = x * m;
    int cell = static_cast<int>(std::floor(t));
    double frac = t - cell;
    cell %= m;
    if (cell < 0) cell += m;
    const int next = (cell + 1) % m;
    return eigenfunction(cell) * (1.0 - frac) + eigenfunction(next) * frac;
  };
  double integral = 0.0;
  const double h = 1.0 / static_cast<double>(m);
  const int first_cell = static_cast<int>(std::floor(lo * m));
  const int last_cell = static_cast<int>(std::ceil(hi * m)) - 1;
  for (int cell = first_cell; cell <= last_cell; ++cell) {
    const double a = std::max(lo, cell * h);
    const double b = std::min(hi, (cell + 1) * h);
    if (b <= a) continue;
    integral += 0.5 * (value_at(a) + value_at(b)) * (b - a);
  }
  return integral / total;
}

}  // namespace rild
