// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "mltet/mesh.hpp"

using namespace mltet;

TEST_CASE("block mesh basics") {
  auto unit = build_block_mesh(1, 1, 1, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones());
  CHECK(unit.tet_count() == 6);
  CHECK(unit.total_volume() == doctest::Approx(1.0).epsilon(1e-14));

  auto m2 = build_block_mesh(2, 2, 2, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones());
  CHECK(m2.tet_count() == 48);
  CHECK(m2.total_volume() == doctest::Approx(1.0).epsilon(1e-14));

  auto md = build_block_mesh(4, 4, 4, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones(), 0.15);
  CHECK(md.total_volume() == doctest::Approx(1.0).epsilon(1e-12));
  double minDet = std::numeric_limits<double>::infinity();
  for (auto& g : md.geom) minDet = std::min(minDet, g.detJ);
  CHECK(minDet > 0);

  CHECK_THROWS_AS(build_block_mesh(0, 1, 1, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones()),
                  std::invalid_argument);
}

TEST_CASE("mesh file round trip") {
  auto mesh = build_block_mesh(1, 1, 1, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones(), 0.1);
  auto path = std::filesystem::temp_directory_path() / "mltet_mesh_test.txt";
  write_mesh(path.string(), mesh);
  auto back = read_mesh(path.string());
  REQUIRE(back.vertices.size() == mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i)
    CHECK((back.vertices[i] - mesh.vertices[i]).norm() == 0.0);  // 17 significant digits round-trip
  CHECK(back.tets == mesh.tets);
  std::filesystem::remove(path);
}

TEST_CASE("mesh file rejects bad input") {
  auto path = std::filesystem::temp_directory_path() / "mltet_bad_mesh.txt";
  {
    std::ofstream out(path);
    out << "tetmesh 1\n4 1\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 1 2 5\n";
  }
  CHECK_THROWS_AS(read_mesh(path.string()), ParseError);
  {
    // negative volume: swap two vertices of the reference tet
    std::ofstream out(path);
    out << "tetmesh 1\n4 1\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n2 1 3 0\n";
  }
  CHECK_THROWS_AS(read_mesh(path.string()), ParseError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_mesh("/nonexistent/mesh.txt"), ParseError);
}

TEST_CASE("dof counts for the degree-2 element") {
  auto nodes = mass_node_set(ElementId::P2N15);

  auto single = build_block_mesh(1, 1, 1, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones());
  TetMesh one;
  one.vertices = {single.vertices[single.tets[0][0]], single.vertices[single.tets[0][1]],
                  single.vertices[single.tets[0][2]], single.vertices[single.tets[0][3]]};
  one.tets = {{0, 1, 2, 3}};
  one.rebuild_geometry();
  auto dm1 = enumerate_global_dofs(one, nodes, false);
  CHECK(dm1.total == 15);

  // two tets sharing a face: 30 - (3 vertices + 3 edge midpoints + 1 centroid)
  TetMesh two;
  two.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
  two.tets = {{1, 2, 3, 0}, {2, 1, 3, 4}};
  two.rebuild_geometry();
  auto dm2 = enumerate_global_dofs(two, nodes, false);
  CHECK(dm2.total == 23);
}

TEST_CASE("dof counts: P1 vertices on a block") {
  NodeSet vertices;
  vertices.orbits = {{OrbitType::T31, {0.0}}};
  auto mesh = build_block_mesh(2, 2, 2, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones());
  auto dm = enumerate_global_dofs(mesh, vertices, false);
  CHECK(dm.total == 27);
  auto dmD = enumerate_global_dofs(mesh, vertices, true);
  CHECK(dmD.free_count == 1);  // only the centre vertex is interior
}

TEST_CASE("global continuity across shared faces") {
  auto nodes = mass_node_set(ElementId::P2N15);
  auto space = element_space(ElementId::P2N15);
  auto basis = build_nodal_basis(space, nodes);
  auto mesh = build_block_mesh(2, 2, 2, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones(), 0.12);
  auto dm = enumerate_global_dofs(mesh, nodes, false);

  // take a global nodal field, evaluate it from both sides of interior faces
  std::mt19937_64 rng(71);
  std::normal_distribution<double> normal;
  Eigen::VectorXd u(dm.total);
  for (int i = 0; i < dm.total; ++i) u(i) = normal(rng);

  auto evalInElement = [&](int e, const Bary& p) {
    double s = 0;
    for (size_t a = 0; a < basis.w.size(); ++a) s += u(dm.element_dofs[e][a]) * basis.w[a].eval(p);
    return s;
  };

  // find pairs of elements sharing a face through the face-count map
  std::map<std::array<int, 3>, std::vector<std::pair<int, int>>> faces;
  for (int e = 0; e < mesh.tet_count(); ++e)
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> key;
      int idx = 0;
      for (int v = 0; v < 4; ++v)
        if (v != f) key[idx++] = mesh.tets[e][v];
      std::sort(key.begin(), key.end());
      faces[key].emplace_back(e, f);
    }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int tested = 0;
  for (auto& [key, sides] : faces) {
    if (sides.size() != 2 || tested >= 5) continue;
    ++tested;
    for (int s = 0; s < 20; ++s) {
      double a = unit(rng), b = unit(rng);
      if (a + b > 1) {
        a = 1 - a;
        b = 1 - b;
      }
      // physical point on the face via vertices of the first side
      auto [e0, f0] = sides[0];
      std::array<int, 3> verts;
      int idx = 0;
      for (int v = 0; v < 4; ++v)
        if (v != f0) verts[idx++] = mesh.tets[e0][v];
      Eigen::Vector3d x = a * mesh.vertices[verts[0]] + b * mesh.vertices[verts[1]] +
                          (1 - a - b) * mesh.vertices[verts[2]];
      // barycentric coordinates of x in each element
      double val[2];
      for (int side = 0; side < 2; ++side) {
        auto [e, f] = sides[side];
        Eigen::Vector3d ref = mesh.geom[e].Jinv * (x - mesh.geom[e].origin);
        val[side] = evalInElement(e, {ref[0], ref[1], ref[2], 1 - ref[0] - ref[1] - ref[2]});
      }
      CHECK(val[0] == doctest::Approx(val[1]).epsilon(1e-9));
    }
  }
  CHECK(tested == 5);
}

TEST_CASE("dof map is permutation stable") {
  auto nodes = mass_node_set(ElementId::P2N15);
  auto mesh = build_block_mesh(2, 1, 1, Eigen::Vector3d::Zero(), Eigen::Vector3d(2, 1, 1));
  auto dm = enumerate_global_dofs(mesh, nodes, true);

  TetMesh shuffled = mesh;
  std::reverse(shuffled.tets.begin(), shuffled.tets.end());
  shuffled.rebuild_geometry();
  auto dm2 = enumerate_global_dofs(shuffled, nodes, true);
  CHECK(dm.free_count == dm2.free_count);
  CHECK(dm.total == dm2.total);

  // the assembled quadratic form is independent of element ordering: compare
  // u^T A u for the same coordinate-defined nodal field on both meshes
  const auto& t = kernel_tables(ElementId::P2N15);
  auto field = [](const Eigen::Vector3d& x) {
    return std::sin(1.3 * x[0]) + 0.7 * x[1] * x[2] + 0.2 * x[0] * x[0];
  };
  auto quadForm = [&](const TetMesh& m, const DofMap& d) {
    double q = 0;
    for (int e = 0; e < m.tet_count(); ++e) {
      Eigen::VectorXd ul(t.n);
      for (int a = 0; a < t.n; ++a) ul(a) = field(d.coords[d.element_dofs[e][a]]);
      auto ct = scalar_reference_tensor(1.0, m.geom[e]);
      q += ul.dot(matvec_exact_scalar(t, ct, ul));
    }
    return q;
  };
  CHECK(quadForm(mesh, dm) == doctest::Approx(quadForm(shuffled, dm2)).epsilon(1e-12));
}

TEST_CASE("honeycomb cell geometry") {
  Eigen::Matrix3d T = honeycomb_transform();
  CHECK(T.determinant() == doctest::Approx(4.0 / (3.0 * std::sqrt(3.0))).epsilon(1e-14));
  CHECK(honeycomb_average_element_volume() == doctest::Approx(2.0 * std::sqrt(3.0) / 27.0).epsilon(1e-14));

  auto nodes = mass_node_set(ElementId::P2N15);
  auto cell = build_honeycomb_cell(nodes);
  CHECK(cell.mesh.tet_count() == 6);

  // congruent tets: identical sorted edge-length multisets
  std::vector<std::array<double, 6>> edges;
  for (auto& t : cell.mesh.tets) {
    std::array<double, 6> e;
    int idx = 0;
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        e[idx++] = (cell.mesh.vertices[t[a]] - cell.mesh.vertices[t[b]]).norm();
    std::sort(e.begin(), e.end());
    edges.push_back(e);
  }
  for (size_t i = 1; i < edges.size(); ++i)
    for (int j = 0; j < 6; ++j) CHECK(edges[i][j] == doctest::Approx(edges[0][j]).epsilon(1e-12));

  // every element volume equals det(T)/6
  for (auto& g : cell.mesh.geom)
    CHECK(g.detJ / 6.0 == doctest::Approx(honeycomb_average_element_volume()).epsilon(1e-13));

  // owned-node count regression for the degree-2 element
  CHECK(cell.n0 == 26);

  // every node maps to exactly one owned representative
  for (int e = 0; e < cell.mesh.tet_count(); ++e)
    for (auto idx : cell.owned[e]) {
      CHECK(idx >= 0);
      CHECK(idx < cell.n0);
    }
}
