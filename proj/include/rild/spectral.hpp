#pragma once

#include <Eigen/Core>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "rild/errors.hpp"

namespace rild {

// Uniform periodic grid x_m = m / M on [0, 1), M even and at least 16.
struct PeriodicGrid {
  int size = 0;

  explicit PeriodicGrid(int m);
  double node(int m) const { return static_cast<double>(m) / size; }
  Eigen::VectorXd nodes() const;
};

// Fourier pseudospectral differentiation matrix of the given order (1 or 2),
// built by transforming the canonical basis vectors. The Nyquist mode is
// zeroed for odd orders, as usual for even-sized real grids.
Eigen::MatrixXd fourier_differentiation_matrix(const PeriodicGrid& grid, int order);

// C-infinity periodization of a raw potential on [0, 1]: blends the raw
// values toward the constant raw(0) inside [0, w] and [1 - w, 1] using a
// smooth bump, leaving [w, 1 - w] untouched. Continuous evaluation, so the
// seam behavior can be checked off-grid.
class PeriodizedPotential {
 public:
  PeriodizedPotential(std::function<double(double)> raw, double blend_width);
  double operator()(double x) const;
  double blend_width() const { return blend_; }

 private:
  std::function<double(double)> raw_;
  double blend_;
  double base_;  // raw(0)
};

// Samples the periodization on the grid.
Eigen::VectorXd smooth_periodize(const PeriodicGrid& grid, const std::function<double(double)>& raw,
                                 double blend_width);

// The two-cosine potential V(x) = cos(9 pi x) - cos(11 pi x), equivalently
// 2 sin(pi x) sin(10 pi x): several wells on [0, 1] with the deepest near
// x = 0.55.
double cosine_mix_potential(double x);

// A dense discretized operator on grid functions.
struct OperatorMatrix {
  Eigen::MatrixXd matrix;
  std::string kind;
  double parameter = 0.0;
  int grid_size = 0;
};

// Drift-diffusion generator with a multiplicative source:
//   f  |->  f'' - V' . f' - epsilon V . f
// (unit diffusion). With epsilon = 0 this annihilates constants.
OperatorMatrix assemble_langevin_operator(const PeriodicGrid& grid,
                                          const Eigen::VectorXd& v_samples, double epsilon);

// Diffusion-plus-source operator  f |-> (sigma^2 / 2) f'' + W . f.
OperatorMatrix assemble_diffusion_source_operator(const PeriodicGrid& grid,
                                                  const Eigen::VectorXd& w_samples, double sigma);

// An eigenvalue with its stationary-density-side eigenfunction, which is
// sign-normalized (nonnegative mean) and L1-normalized: sum |f_m| / M = 1.
struct EigenPair {
  std::complex<double> value;
  Eigen::VectorXd function;
};

// Leading `count` eigenpairs sorted by descending real part, with
// multiplicity. Eigenfunctions are taken on the density side (the adjoint of
// the assembled operator), so the principal eigenfunction of the drift-
// diffusion generator is its stationary density rather than the constant;
// for the symmetric diffusion-source operator the two sides coincide.
std::vector<EigenPair> leading_eigenpairs(const OperatorMatrix& op, int count);

struct GapPoint {
  double parameter = 0.0;
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double gap = 0.0;
};

// lambda0, lambda1, and their difference for the source-modified generator
// at each epsilon in the list.
std::vector<GapPoint> spectral_gap_curve(const PeriodicGrid& grid,
                                         const Eigen::VectorXd& v_samples,
                                         const std::vector<double>& epsilon_list);

// Fraction of the L1 mass of a nonnegative grid function inside [lo, hi],
// computed from the piecewise-linear periodic interpolant so that interval
// endpoints need not be grid nodes. A constant function yields hi - lo.
double mass_concentration(const Eigen::VectorXd& eigenfunction, double lo, double hi);

}  // namespace rild
