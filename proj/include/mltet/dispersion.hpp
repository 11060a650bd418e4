// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <map>
#include <vector>

#include "mltet/mesh.hpp"

namespace mltet {

enum class StiffnessMode { Exact, Rule };

// Single-cell Bloch operator of the plane-wave problem with rho = c = 1:
// diagonal mass and one stiffness block per lattice shift in {-1,0,1}^3.
struct BlochOperator {
  Eigen::Matrix3d T;
  int n0 = 0;
  Eigen::VectorXd M;
  std::map<std::array<int, 3>, Eigen::MatrixXd> blocks;
};

BlochOperator assemble_bloch_operator(const PeriodicCell& cell, const KernelTables& tables,
                                      StiffnessMode mode);

// Hermitian similarity M^{-1/2} (sum_k e^{i kappa.T.k} A^{(k)}) M^{-1/2};
// same spectrum as M^{-1} A(kappa).
Eigen::MatrixXcd bloch_matrix(const BlochOperator& op, const Eigen::Vector3d& kappa);

struct NotHermitian : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ascending eigenvalues; input must be Hermitian within 1e-10 relative.
std::vector<double> hermitian_eigenvalues(const Eigen::MatrixXcd& H);

// Stability constants of the order-2K scheme, K = 1..4.
double dablain_cK(int K);

struct NumericalOmega {
  bool stable = false;
  double omega = 0;
};

// omega_h = arccos(sum_{k<=K} (-dt^2 s)^k / (2k)!) / dt, nonnegative branch;
// unstable when the arccos argument leaves [-1, 1].
NumericalOmega numerical_omega(double s, double dt, int K);

// Deterministic direction set (spherical Fibonacci points).
std::vector<Eigen::Vector3d> fibonacci_sphere_directions(int n);

// sup over sampled directions (|kappa| = 2*pi/lambda) of the branch-matched
// relative wave-speed error. dt <= 0 selects the semidiscrete limit
// omega_h = sqrt(s).
double dispersion_error(const BlochOperator& op, double lambda, int K, double dt, int nDirections);

// Largest eigenvalue over the wave-vector grid T^{-t} [0,2pi)^3, with local
// grid-halving refinements around the argmax. `argmaxKappa`, when given,
// receives the maximizing wave vector.
double max_spatial_eigenvalue(const BlochOperator& op, int gridPerAxis = 16, int refineRounds = 2,
                              Eigen::Vector3d* argmaxKappa = nullptr);

double elements_per_wavelength(double lambda);  // N_E = (lambda^3/|e|_av)^{1/3}

struct DegenerateFit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PowerFit {
  double coeff = 0;
  double exponent = 0;  // e ~ coeff * N^(-exponent)
};

// Log-log least squares over the points with e below 0.1 (resolved regime).
PowerFit fit_power_law(const std::vector<std::pair<double, double>>& pointsNE);

}  // namespace mltet
