// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mltet/dispersion.hpp"
#include "mltet/mesh.hpp"

namespace mltet {

struct NoConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class BoundaryKind { Dirichlet, Neumann };
// "QuadraturePoints" samples rho at mass nodes and c at the stiffness rule
// points. "PiecewiseConstant" freezes both per element at the element's
// lexicographically smallest vertex; sampling at the centroid would cancel
// the leading coefficient-approximation error (the element average of
// x - x_centroid vanishes) and hide the order reduction this mode exists to
// expose.
enum class MaterialSampling { QuadraturePoints, PiecewiseConstant };

using SpatialFn = std::function<double(const Eigen::Vector3d&)>;

struct WaveProblem {
  TetMesh mesh;
  DofMap dofs;
  ElementId element{};
  StiffnessMode mode = StiffnessMode::Rule;
  BoundaryKind boundary = BoundaryKind::Neumann;
  FieldMode physics = FieldMode::Scalar;
  MaterialSampling sampling = MaterialSampling::QuadraturePoints;
  const KernelTables* tables = nullptr;

  // Per-element material data (mode- and physics-dependent).
  std::vector<Eigen::Matrix3d> ct;                     // scalar exact
  std::vector<std::vector<Eigen::Matrix3d>> csamples;  // scalar rule
  std::vector<std::pair<double, double>> lame;         // elastic exact
  std::vector<std::vector<double>> lambda_q, mu_q;     // elastic rule

  Eigen::VectorXd mass;  // lumped, free dofs, all components

  int components() const { return physics == FieldMode::Scalar ? 1 : 3; }
  int size() const { return dofs.free_count * components(); }
};

WaveProblem build_scalar_problem(TetMesh mesh, ElementId element, StiffnessMode mode,
                                 BoundaryKind boundary, MaterialSampling sampling,
                                 const SpatialFn& rho, const SpatialFn& c,
                                 const std::string& ruleLabel = "");

WaveProblem build_elastic_problem(TetMesh mesh, ElementId element, StiffnessMode mode,
                                  BoundaryKind boundary, MaterialSampling sampling,
                                  const SpatialFn& rho, const SpatialFn& lambda, const SpatialFn& mu,
                                  const std::string& ruleLabel = "");

// Stiffness action on the free dofs (boundary rows and columns masked).
Eigen::VectorXd global_matvec(const WaveProblem& problem, const Eigen::VectorXd& u);
// M^{-1} A u.
Eigen::VectorXd apply_spatial_operator(const WaveProblem& problem, const Eigen::VectorXd& u);

double energy_norm(const WaveProblem& problem, const Eigen::VectorXd& u);  // ||u||_M

// Nodal interpolation of a continuous function onto the free dofs.
Eigen::VectorXd interpolate_scalar(const WaveProblem& problem, const SpatialFn& f);

// Dominant eigenvalue of M^{-1}A via power iteration on the symmetrized form;
// converged when the relative change stays below tol on consecutive steps.
double estimate_sigma_max(const WaveProblem& problem, double tol = 1e-5, int maxIters = 200000);

// Time source: returns the 2m-th time derivative of the nodal load
// rho^{-1} f at time t (m = 0 is the load itself).
using SourceFn = std::function<Eigen::VectorXd(double t, int evenDerivativeOrder)>;

struct SimulationState {
  Eigen::VectorXd u_prev, u_curr;
  double time = 0;
  double dt = 0;
  int K = 2;
};

// u_prev from the order-2K Taylor start (source-free start).
SimulationState make_initial_state(const WaveProblem& problem, const Eigen::VectorXd& u0,
                                   const Eigen::VectorXd& v0, double dt, int K);

void dablain_step(SimulationState& state, const WaveProblem& problem, const SourceFn* source = nullptr);

// Standing-wave solution of the heterogeneous acoustic benchmark: distorted
// coordinates X_i = x_i + (a_i/m_i) cos(m_i x_i) with m_i = pi/(2 L_i) on the
// box (-L_1,L_1)x(-L_2,L_2)x(-L_3,L_3) and zero Neumann boundaries.
struct AcousticManufactured {
  std::array<double, 3> L{1, 1, 1};
  std::array<double, 3> a{0.2, 0.2, 0.2};
  std::array<double, 3> kmult{3, 3, 3};  // k_i as multiples of m_i
  double rho0 = 2, c0 = 2;

  double m(int i) const { return 0.5 * M_PI / L[i]; }
  double k(int i) const { return kmult[i] * m(i); }
  double omega() const;
  double final_time() const { return 4.0 * M_PI / omega(); }  // two oscillations

  double X(int i, double xi) const { return xi + a[i] / m(i) * std::cos(m(i) * xi); }
  double g(int i, double xi) const { return 1.0 - a[i] * std::sin(m(i) * xi); }

  double rho(const Eigen::Vector3d& x) const;
  double c(const Eigen::Vector3d& x) const;
  double pressure(const Eigen::Vector3d& x, double t) const;

  // Coefficients of the generic wave form: rho_eq d_tt p = div(c_eq grad p).
  double rho_eq(const Eigen::Vector3d& x) const { return 1.0 / (rho(x) * c(x) * c(x)); }
  double c_eq(const Eigen::Vector3d& x) const { return 1.0 / rho(x); }

  Eigen::Vector3d box_lo() const { return {-L[0], -L[1], -L[2]}; }
  Eigen::Vector3d box_hi() const { return {L[0], L[1], L[2]}; }
};

struct ConvergenceRow {
  int cellsPerAxis = 0;
  int N = 0;           // free dofs
  double h = 0;        // nominal cell size
  double rms = 0;      // nodal RMS error at the final time
  int steps = 0;
  double dt = 0;
  double sigmaMax = 0;
  double seconds = 0;
};

ConvergenceRow run_convergence_case(const AcousticManufactured& problem, ElementId element,
                                    StiffnessMode mode, MaterialSampling sampling, int cellsPerAxis,
                                    double distortion, int K = 2);

std::vector<ConvergenceRow> run_convergence_study(const AcousticManufactured& problem,
                                                  ElementId element, StiffnessMode mode,
                                                  MaterialSampling sampling,
                                                  const std::vector<int>& sizes, double distortion,
                                                  int K = 2);

// Little-endian float64 dump with a 16-byte header (magic + count).
void write_snapshot(const std::string& path, const Eigen::VectorXd& u);
Eigen::VectorXd read_snapshot(const std::string& path);

}  // namespace mltet
