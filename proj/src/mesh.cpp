// SPDX-License-Identifier: Apache-2.0
#include "mltet/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace mltet {

double TetMesh::total_volume() const {
  double v = 0;
  for (auto& g : geom) v += g.detJ / 6.0;
  return v;
}

void TetMesh::rebuild_geometry() {
  geom.clear();
  geom.reserve(tets.size());
  for (auto& t : tets) {
    const Eigen::Vector3d& p4 = vertices[t[3]];
    Eigen::Matrix3d J;
    J.col(0) = vertices[t[0]] - p4;
    J.col(1) = vertices[t[1]] - p4;
    J.col(2) = vertices[t[2]] - p4;
    geom.push_back(ElementGeometry::from_jacobian(J, p4));
  }
}

TetMesh build_block_mesh(int nx, int ny, int nz, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                         double distortion) {
  if (nx < 1 || ny < 1 || nz < 1) throw std::invalid_argument("cell counts must be >= 1");
  TetMesh mesh;
  const int sx = nx + 1, sy = ny + 1, sz = nz + 1;
  auto vid = [&](int i, int j, int k) { return (k * sy + j) * sx + i; };

  const Eigen::Vector3d len = hi - lo;
  mesh.vertices.reserve(sx * sy * sz);
  for (int k = 0; k < sz; ++k)
    for (int j = 0; j < sy; ++j)
      for (int i = 0; i < sx; ++i) {
        Eigen::Vector3d xi(static_cast<double>(i) / nx, static_cast<double>(j) / ny,
                           static_cast<double>(k) / nz);
        Eigen::Vector3d x = lo + xi.cwiseProduct(len);
        if (distortion != 0.0) {
          const double w = std::sin(M_PI * xi[0]) * std::sin(M_PI * xi[1]) * std::sin(M_PI * xi[2]);
          const double alpha = distortion / 3.0;
          x[0] += alpha * len[0] * w * std::cos(2 * M_PI * xi[1]);
          x[1] += alpha * len[1] * w * std::cos(2 * M_PI * xi[2]);
          x[2] += alpha * len[2] * w * std::cos(2 * M_PI * xi[0]);
        }
        mesh.vertices.push_back(x);
      }

  // Kuhn split: one tet per coordinate ordering x_{s0} >= x_{s1} >= x_{s2},
  // walking 000 -> e_{s0} -> e_{s0}+e_{s1} -> 111; conforming across cells.
  static const int orders[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        int corner[3] = {i, j, k};
        for (auto& ord : orders) {
          int a[3] = {corner[0], corner[1], corner[2]};
          int v0 = vid(a[0], a[1], a[2]);
          a[ord[0]] += 1;
          int v1 = vid(a[0], a[1], a[2]);
          a[ord[1]] += 1;
          int v2 = vid(a[0], a[1], a[2]);
          a[ord[2]] += 1;
          int v3 = vid(a[0], a[1], a[2]);
          // Reference origin at v0; flip two vertices when the ordering is odd.
          std::array<int, 4> tet{v1, v2, v3, v0};
          Eigen::Matrix3d J;
          J.col(0) = mesh.vertices[tet[0]] - mesh.vertices[tet[3]];
          J.col(1) = mesh.vertices[tet[1]] - mesh.vertices[tet[3]];
          J.col(2) = mesh.vertices[tet[2]] - mesh.vertices[tet[3]];
          if (J.determinant() < 0) std::swap(tet[0], tet[1]);
          mesh.tets.push_back(tet);
        }
      }
  mesh.rebuild_geometry();
  return mesh;
}

void write_mesh(const std::string& path, const TetMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << "tetmesh 1\n";
  out << mesh.vertices.size() << " " << mesh.tets.size() << "\n";
  char buf[96];
  for (auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v[0], v[1], v[2]);
    out << buf;
  }
  for (auto& t : mesh.tets) out << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << "\n";
}

TetMesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  std::string line;
  int lineNo = 0;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw ParseError(path + ":" + std::to_string(lineNo + 1) + ": unexpected end of file");
    ++lineNo;
  };
  next_line();
  if (line != "tetmesh 1") throw ParseError(path + ":1: expected header 'tetmesh 1'");
  next_line();
  size_t nv = 0, nt = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> nv >> nt)) throw ParseError(path + ":2: expected vertex and tet counts");
  }
  TetMesh mesh;
  mesh.vertices.reserve(nv);
  for (size_t i = 0; i < nv; ++i) {
    next_line();
    std::istringstream ss(line);
    Eigen::Vector3d v;
    if (!(ss >> v[0] >> v[1] >> v[2]))
      throw ParseError(path + ":" + std::to_string(lineNo) + ": bad vertex line");
    mesh.vertices.push_back(v);
  }
  for (size_t i = 0; i < nt; ++i) {
    next_line();
    std::istringstream ss(line);
    std::array<int, 4> t{};
    if (!(ss >> t[0] >> t[1] >> t[2] >> t[3]))
      throw ParseError(path + ":" + std::to_string(lineNo) + ": bad tet line");
    for (int v : t)
      if (v < 0 || v >= static_cast<int>(nv))
        throw ParseError(path + ":" + std::to_string(lineNo) + ": vertex index out of range");
    mesh.tets.push_back(t);
  }
  try {
    mesh.rebuild_geometry();
  } catch (const InvertedElement& e) {
    throw ParseError(path + ": " + e.what());
  }
  return mesh;
}

namespace {

// Geometric point registry: quantized buck hashing with neighbour probing.
class PointRegistry {
 public:
  explicit PointRegistry(double tol) : tol_(tol), cell_(4 * tol) {}

  int lookup_or_insert(const Eigen::Vector3d& p, std::vector<Eigen::Vector3d>& coords) {
    std::array<long long, 3> base;
    for (int d = 0; d < 3; ++d) base[d] = static_cast<long long>(std::floor(p[d] / cell_));
    for (long long dz = -1; dz <= 1; ++dz)
      for (long long dy = -1; dy <= 1; ++dy)
        for (long long dx = -1; dx <= 1; ++dx) {
          auto it = buckets_.find({base[0] + dx, base[1] + dy, base[2] + dz});
          if (it == buckets_.end()) continue;
          for (int idx : it->second)
            if ((coords[idx] - p).norm() < tol_) return idx;
        }
    int idx = static_cast<int>(coords.size());
    coords.push_back(p);
    buckets_[{base[0], base[1], base[2]}].push_back(idx);
    return idx;
  }

 private:
  double tol_, cell_;
  std::map<std::array<long long, 3>, std::vector<int>> buckets_;
};

double min_edge_length(const TetMesh& mesh) {
  double h = std::numeric_limits<double>::infinity();
  for (auto& t : mesh.tets)
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        h = std::min(h, (mesh.vertices[t[a]] - mesh.vertices[t[b]]).norm());
  return h;
}

}  // namespace

DofMap enumerate_global_dofs(const TetMesh& mesh, const NodeSet& nodes, bool fixBoundary) {
  DofMap dm;
  const auto refNodes = nodes.points();
  const int n = static_cast<int>(refNodes.size());
  const double tol = min_edge_length(mesh) * 1e-8;
  PointRegistry registry(tol);

  dm.element_dofs.resize(mesh.tets.size());
  for (int e = 0; e < mesh.tet_count(); ++e) {
    dm.element_dofs[e].resize(n);
    for (int a = 0; a < n; ++a) {
      Eigen::Vector3d x = mesh.geom[e].map(refNodes[a]);
      dm.element_dofs[e][a] = registry.lookup_or_insert(x, dm.coords);
    }
  }
  dm.total = static_cast<int>(dm.coords.size());

  // Boundary faces: vertex triples seen by exactly one tet.
  std::map<std::array<int, 3>, int> faceCount;
  for (auto& t : mesh.tets)
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> key;
      int idx = 0;
      for (int v = 0; v < 4; ++v)
        if (v != f) key[idx++] = t[v];
      std::sort(key.begin(), key.end());
      ++faceCount[key];
    }
  for (auto& [key, count] : faceCount)
    if (count > 2) throw NonConformingMesh("face shared by more than two tets");

  dm.boundary.assign(dm.total, 0);
  for (int e = 0; e < mesh.tet_count(); ++e)
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> key;
      int idx = 0;
      for (int v = 0; v < 4; ++v)
        if (v != f) key[idx++] = mesh.tets[e][v];
      std::sort(key.begin(), key.end());
      if (faceCount[key] != 1) continue;
      for (int a = 0; a < n; ++a)
        if (refNodes[a][f] < 1e-12) dm.boundary[dm.element_dofs[e][a]] = 1;
    }

  dm.free_index.assign(dm.total, -1);
  for (int g = 0; g < dm.total; ++g) {
    if (fixBoundary && dm.boundary[g]) continue;
    dm.free_index[g] = static_cast<int>(dm.free_to_global.size());
    dm.free_to_global.push_back(g);
  }
  dm.free_count = static_cast<int>(dm.free_to_global.size());

  dm.incidence.resize(dm.total);
  for (int e = 0; e < mesh.tet_count(); ++e)
    for (int a = 0; a < n; ++a) dm.incidence[dm.element_dofs[e][a]].emplace_back(e, a);
  return dm;
}

Eigen::Matrix3d honeycomb_transform() {
  Eigen::Matrix3d T;
  T << 1, -1.0 / 3.0, -1.0 / 3.0,
       0, std::sqrt(8.0 / 9.0), -std::sqrt(2.0 / 9.0),
       0, 0, std::sqrt(2.0 / 3.0);
  return T;
}

double honeycomb_average_element_volume() { return honeycomb_transform().determinant() / 6.0; }

PeriodicCell build_honeycomb_cell(const NodeSet& nodes) {
  PeriodicCell cell;
  cell.T = honeycomb_transform();
  cell.mesh = build_block_mesh(1, 1, 1, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones(), 0.0);
  for (auto& v : cell.mesh.vertices) v = cell.T * v;
  cell.mesh.rebuild_geometry();

  const auto refNodes = nodes.points();
  const int n = static_cast<int>(refNodes.size());
  const Eigen::Matrix3d Tinv = cell.T.inverse();
  PointRegistry registry(1e-8);

  cell.owned.resize(cell.mesh.tets.size());
  cell.shift.resize(cell.mesh.tets.size());
  for (int e = 0; e < cell.mesh.tet_count(); ++e) {
    cell.owned[e].resize(n);
    cell.shift[e].resize(n);
    for (int a = 0; a < n; ++a) {
      Eigen::Vector3d x = cell.mesh.geom[e].map(refNodes[a]);
      Eigen::Vector3d y = Tinv * x;
      std::array<int, 3> k{};
      Eigen::Vector3d yw;
      for (int d = 0; d < 3; ++d) {
        k[d] = static_cast<int>(std::floor(y[d] + 1e-9));
        yw[d] = y[d] - k[d];
        if (yw[d] > 1.0 - 1e-9) {  // snap points sitting on the far face
          yw[d] = 0.0;
          k[d] += 1;
        }
      }
      cell.owned[e][a] = registry.lookup_or_insert(cell.T * yw, cell.owned_coords);
      cell.shift[e][a] = k;
    }
  }
  cell.n0 = static_cast<int>(cell.owned_coords.size());
  return cell;
}

}  // namespace mltet
