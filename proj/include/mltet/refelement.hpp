// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mltet/quadrature.hpp"

namespace mltet {

// Enriched element space: standard polynomials plus face/interior bubble
// products, represented by an explicit monomial basis of full rank.
struct ElementSpace {
  ElementId id;
  int degree = 0;
  int dim = 0;
  std::vector<BaryPoly> basis;      // monomial basis, size dim
  GeneratorSet generators;          // orbit representatives of the spanning monomials
};

ElementSpace element_space(ElementId id);

// Spanning list for the space of all Cartesian partial derivatives of the
// element space (closed under the 24 symmetries as a span).
std::vector<BaryPoly> derivative_space(const ElementSpace& space);

struct NodeSet {
  std::vector<SymmetricOrbit> orbits;
  int count() const;
  std::vector<Bary> points() const;
  // index of the orbit each expanded point belongs to
  std::vector<int> orbit_of_point() const;
};

struct NotUnisolvent : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingElementData : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoPositiveSolution : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SystemInconsistent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NodalBasis {
  std::vector<BaryPoly> w;       // w[i](node j) = delta_ij
  std::vector<Bary> nodes;
  double condition = 0;          // Vandermonde condition estimate
  double delta_residual = 0;     // max |w_i(x_j) - delta_ij| after refinement
};

NodalBasis build_nodal_basis(const ElementSpace& space, const NodeSet& nodes);

// Mass nodes: the degree-2 set is built in (vertices, edge midpoints, face
// centroids, centre); higher degrees load from an element data file found in
// MLTET_DATA_DIR or ./data. Throws MissingElementData.
NodeSet mass_node_set(ElementId id);
bool mass_data_available(ElementId id);

// Per-node quadrature weights making the node rule exact on P_{p-2} (x) U
// (p >= 2; constants only below that), via the symmetry-reduced linear system.
std::vector<double> derive_mass_weights(const ElementSpace& space, const NodeSet& nodes);

bool check_face_conforming(const ElementSpace& space, const NodeSet& nodes,
                           int samplesPerFace = 100, double tol = 1e-9);

struct SpuriousScreen {
  bool pass = false;
  int nullspace_dim = 0;
};
enum class FieldMode { Scalar, Elastic };

// C7 screen: gradients (or symmetric strains) of the basis evaluated at the
// rule points; null space must be the constants (dim 1) or the six rigid
// motions. Works with any basis of the space.
SpuriousScreen check_spurious_free(const std::vector<BaryPoly>& basis, const QuadratureRule& rule,
                                   FieldMode mode);

// Precomputed element tables driving the matrix-free kernels.
struct KernelTables {
  ElementId id;
  int n = 0;   // nodes
  int nq = 0;  // stiffness quadrature points
  std::array<std::array<Eigen::MatrixXd, 3>, 3> B;     // exact grad-grad integrals
  std::array<std::array<Eigen::MatrixXd, 3>, 3> Bhat;  // B + B^t, filled for jD <= iD
  std::array<Eigen::MatrixXd, 3> D;                    // basis gradients at rule points
  Eigen::VectorXd mass_weights;                        // per node
  QuadratureRule rule;
  NodeSet nodes;
  std::vector<Bary> node_points;
  std::vector<Bary> rule_points;
  Eigen::VectorXd rule_weights;
};

std::array<std::array<Eigen::MatrixXd, 3>, 3> precompute_B(const NodalBasis& basis);
std::array<Eigen::MatrixXd, 3> precompute_D(const NodalBasis& basis, const QuadratureRule& rule);

// Full table build; the rule defaults to the element's builtin stiffness rule
// (pass the mass rule to study mass-rule-as-stiffness-rule variants).
KernelTables build_kernel_tables(ElementId id, const QuadratureRule* rule = nullptr);
// Cached lookup keyed on (element, rule label).
const KernelTables& kernel_tables(ElementId id, const std::string& ruleLabel = "");

// The node set with per-node weights, as the mass-rule counterpart of a
// stiffness rule (e.g. the 15-point rule for p2n15).
QuadratureRule mass_rule(ElementId id);

// ---- element data files -------------------------------------------------

struct ElementData {
  ElementId id;
  std::string role;  // "mass" or "stiffness"
  NodeSet nodes;
  std::vector<double> orbit_weights;
};

void write_element_data(const std::string& path, const ElementData& data, const std::string& label = "");
// Loads and validates: C1 unisolvence, C2 by construction, C3 face
// conformity, C4 positivity, C5 accuracy of the stored weights.
ElementData load_element_data(const std::string& path);

// ---- mass element search -------------------------------------------------

// One node orbit whose parameters depend affinely on free search variables:
// params = offset + coeff * theta_local.
struct NodeOrbitSpec {
  OrbitType type;
  std::vector<double> offset;
  std::vector<std::vector<double>> coeff;  // param_count rows
  int free_count() const { return coeff.empty() ? 0 : static_cast<int>(coeff[0].size()); }
};

struct MassFindOptions {
  int max_trials = 500;
  int max_newton_iters = 300;
  std::uint64_t seed = 1;
  double residual_tol = 1e-12;
  // Optional centre of the random location draw (one entry per free
  // parameter); trials jitter uniformly around it. Empty: the default box.
  std::vector<double> location_guess;
  double location_jitter = 0.08;
};

struct MassFindResult {
  bool found = false;
  NodeSet nodes;
  std::vector<double> orbit_weights;
  int trials = 0;
  int converged_inadmissible = 0;
  int diverged = 0;
  double final_residual = 0;
  double best_residual = std::numeric_limits<double>::infinity();  // across all trials
};

// Newton (or Gauss-Newton when overdetermined) on the symmetry-reduced
// exactness system of P_{p-2} (x) U over weights and free node locations;
// accepted solutions satisfy C1-C5.
MassFindResult find_mass_element(const ElementSpace& space, const std::vector<NodeOrbitSpec>& specs,
                                 const MassFindOptions& opts);

// Node layout of the degree-3 element: vertices, a symmetric pair per edge,
// three points per face, four interior points on the vertex-centre lines.
std::vector<NodeOrbitSpec> p3n32_mass_ansatz();

// Degree-4 layouts: vertices, midpoint plus a symmetric pair per edge, two
// three-point orbits per face, and interior [3,1]+[3,1]+[2,2] orbits; the
// 61-node variant adds the centre, the 65-node variant also adds the face
// centroids. Unknown counts match the symmetric moment counts (14/15/16).
std::vector<NodeOrbitSpec> p4_mass_ansatz(ElementId id);

}  // namespace mltet
