// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mltet/refelement.hpp"

// Matrix-free element stiffness actions. The exact family contracts the
// precomputed grad-grad integrals B with a constant reference material tensor;
// the quadrature family evaluates gradients at the stiffness rule points via D
// and supports materials that vary inside the element.

namespace mltet {

struct InvertedElement : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonpositiveDensity : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ElementGeometry {
  Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d Jinv = Eigen::Matrix3d::Identity();
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();  // image of the (0,0,0) vertex
  double detJ = 1.0;

  static ElementGeometry from_jacobian(const Eigen::Matrix3d& J,
                                       const Eigen::Vector3d& origin = Eigen::Vector3d::Zero());
  Eigen::Vector3d map(const Bary& ref) const;
};

// Reference scalar material: c * detJ * Jinv * Jinv^t (SPD for c > 0).
Eigen::Matrix3d scalar_reference_tensor(double c, const ElementGeometry& geom);

// Per-quadrature-point transformed and weight-scaled scalar tensors.
std::vector<Eigen::Matrix3d> transform_scalar(const std::vector<double>& cAtPoints,
                                              const ElementGeometry& geom,
                                              const Eigen::VectorXd& ruleWeights);

// Rank-4 elasticity tensor, c[i][j][k][l] with [C:grad u]_{ij} = sum C_ijkl d_l u_k.
struct ElasticTensor {
  std::array<double, 81> c{};
  double& at(int i, int j, int k, int l) { return c[((i * 3 + j) * 3 + k) * 3 + l]; }
  double at(int i, int j, int k, int l) const { return c[((i * 3 + j) * 3 + k) * 3 + l]; }
  static ElasticTensor isotropic(double lambda, double mu);
};

// detJ * Jinv . C . Jinv^t on the two derivative slots (first and fourth).
ElasticTensor transform_elastic(const ElasticTensor& physical, const ElementGeometry& geom);

// ---- scalar kernels -------------------------------------------------------

// Exact integration, constant reference tensor ct (from scalar_reference_tensor).
Eigen::VectorXd matvec_exact_scalar(const KernelTables& t, const Eigen::Matrix3d& ct,
                                    const Eigen::VectorXd& u);

// Quadrature path; samples from transform_scalar.
Eigen::VectorXd matvec_quad_scalar(const KernelTables& t, const std::vector<Eigen::Matrix3d>& samples,
                                   const Eigen::VectorXd& u);

// ---- elastic kernels ------------------------------------------------------
// Vector fields are stored component-blocked: u = [u_x; u_y; u_z], each block
// holding the nodal values of one Cartesian component.

// Exact integration with a constant transformed tensor.
Eigen::VectorXd matvec_exact_elastic(const KernelTables& t, const ElasticTensor& ctilde,
                                     const Eigen::VectorXd& u);
// Isotropic fast path (physical Lame parameters).
Eigen::VectorXd matvec_exact_elastic_isotropic(const KernelTables& t, const ElementGeometry& geom,
                                               double lambda, double mu, const Eigen::VectorXd& u);

// Quadrature path, generic per-point transformed weighted tensors.
Eigen::VectorXd matvec_quad_elastic(const KernelTables& t, const std::vector<ElasticTensor>& samples,
                                    const Eigen::VectorXd& u);
// Quadrature path taking physical per-point tensors; contracts through the
// symmetric 6-component strain internally. Matches matvec_quad_elastic.
Eigen::VectorXd matvec_quad_elastic_voigt(const KernelTables& t, const ElementGeometry& geom,
                                          const std::vector<ElasticTensor>& physicalAtPoints,
                                          const Eigen::VectorXd& u);
// Isotropic fast path for per-point physical Lame parameters.
Eigen::VectorXd matvec_quad_elastic_isotropic(const KernelTables& t, const ElementGeometry& geom,
                                              const std::vector<double>& lambdaAtPoints,
                                              const std::vector<double>& muAtPoints,
                                              const Eigen::VectorXd& u);

// Lumped mass entries detJ * w_i * rho(x_i); throws on rho <= 0.
Eigen::VectorXd mass_diagonal(const KernelTables& t, const ElementGeometry& geom,
                              const Eigen::VectorXd& rhoAtNodes);

// Dense element matrices (dispersion assembly and test oracles).
Eigen::MatrixXd element_matrix_exact_scalar(const KernelTables& t, const Eigen::Matrix3d& ct);
Eigen::MatrixXd element_matrix_quad_scalar(const KernelTables& t,
                                           const std::vector<Eigen::Matrix3d>& samples);

// Matrix-product counters for the operation-count audit (B: n x n products,
// D: n' x n products, transposed applications included).
struct KernelOpCounters {
  std::uint64_t b_products = 0;
  std::uint64_t d_products = 0;
};
KernelOpCounters& kernel_op_counters();
void reset_kernel_op_counters();

}  // namespace mltet
