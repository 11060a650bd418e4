// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "mltet/kernels.hpp"
#include "mltet/refelement.hpp"

namespace mltet {

struct NonConformingMesh : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TetMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 4>> tets;  // vertex indices; last one maps to the reference origin
  std::vector<ElementGeometry> geom;     // per tet, J columns are edge vectors from the origin vertex

  int tet_count() const { return static_cast<int>(tets.size()); }
  double total_volume() const;
  void rebuild_geometry();  // throws InvertedElement
};

// Kuhn subdivision of an nx x ny x nz block into 6 tets per cell, sliced by
// the planes x1=x2, x2=x3, x1=x3 of each cell. `distortion` adds a fixed
// smooth displacement field vanishing on the box boundary; its magnitude is
// the approximate bound on the displacement gradient (keep below ~0.3).
TetMesh build_block_mesh(int nx, int ny, int nz, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                         double distortion = 0.0);

void write_mesh(const std::string& path, const TetMesh& mesh);
TetMesh read_mesh(const std::string& path);

// Continuous global numbering of the node images phi_e(x~). Nodes shared
// across elements (vertex/edge/face orbits) collapse to one global index by
// geometric identification; boundary nodes are flagged.
struct DofMap {
  int total = 0;
  int free_count = 0;
  std::vector<std::vector<int>> element_dofs;  // per tet: local node -> global dof
  std::vector<Eigen::Vector3d> coords;         // per global dof
  std::vector<char> boundary;                  // per global dof
  std::vector<int> free_index;                 // global -> free (-1 when boundary-fixed)
  std::vector<int> free_to_global;
  std::vector<std::vector<std::pair<int, int>>> incidence;  // per global dof: (tet, local)
};

// `fixBoundary` selects Dirichlet elimination; with false every dof is free
// (zero Neumann needs no extra terms).
DofMap enumerate_global_dofs(const TetMesh& mesh, const NodeSet& nodes, bool fixBoundary);

// The tetragonal disphenoid honeycomb cell: 6 congruent tets on T.[0,1)^3
// with nodes identified under integer lattice translations T.k.
struct PeriodicCell {
  TetMesh mesh;
  Eigen::Matrix3d T;
  int n0 = 0;  // owned node count
  std::vector<std::vector<int>> owned;                 // per tet: local node -> owned index
  std::vector<std::vector<std::array<int, 3>>> shift;  // per tet: local node -> lattice shift
  std::vector<Eigen::Vector3d> owned_coords;
};

Eigen::Matrix3d honeycomb_transform();      // the matrix T
double honeycomb_average_element_volume();  // det(T)/6 = 2*sqrt(3)/27
PeriodicCell build_honeycomb_cell(const NodeSet& nodes);

}  // namespace mltet
