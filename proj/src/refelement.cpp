// SPDX-License-Identifier: Apache-2.0
#include "mltet/refelement.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>

#include "json.hpp"

namespace mltet {

using nlohmann::json;

namespace {

// Collect distinct monomials (by packed key) of a spanning list.
std::vector<BaryPoly> dedupe_monomials(const std::vector<BaryPoly>& polys) {
  std::set<MonoKey> keys;
  for (auto& p : polys)
    for (auto& [k, c] : p.terms()) keys.insert(k);
  std::vector<BaryPoly> out;
  out.reserve(keys.size());
  for (MonoKey k : keys) {
    auto m = mono_unkey(k);
    out.push_back(BaryPoly::monomial(m.e[0], m.e[1], m.e[2], m.e[3]));
  }
  return out;
}

std::vector<BaryPoly> orbit_monomials(int a, int b, int c, int d) {
  return expand_generator(BaryPoly::monomial(a, b, c, d));
}

MonoKey sorted_pattern(MonoKey k) {
  auto m = mono_unkey(k);
  std::sort(m.e.begin(), m.e.end(), std::greater<int>());
  return mono_key(m.e[0], m.e[1], m.e[2], m.e[3]);
}

}  // namespace

ElementSpace element_space(ElementId id) {
  std::vector<BaryPoly> span;
  auto add = [&](const std::vector<BaryPoly>& v) { span.insert(span.end(), v.begin(), v.end()); };

  const auto Bf = orbit_monomials(1, 1, 1, 0);
  const auto Be = orbit_monomials(1, 1, 1, 1);
  switch (id) {
    case ElementId::P2N15:
      add(homogeneous_monomials(2));
      add(Bf);
      add(Be);
      break;
    case ElementId::P3N32:
      add(homogeneous_monomials(3));
      add(product_span(Bf, homogeneous_monomials(1)));
      add(product_span(Be, homogeneous_monomials(1)));
      break;
    case ElementId::P4N60: {
      add(homogeneous_monomials(4));
      add(product_span(Bf, homogeneous_monomials(2)));
      auto p2bf = homogeneous_monomials(2);
      p2bf.insert(p2bf.end(), Bf.begin(), Bf.end());
      add(product_span(Be, p2bf));
      break;
    }
    case ElementId::P4N61: {
      add(homogeneous_monomials(4));
      add(product_span(Bf, homogeneous_monomials(2)));
      auto enrich = homogeneous_monomials(2);
      enrich.insert(enrich.end(), Bf.begin(), Bf.end());
      enrich.insert(enrich.end(), Be.begin(), Be.end());
      add(product_span(Be, enrich));
      break;
    }
    case ElementId::P4N65: {
      add(homogeneous_monomials(4));
      auto p2bf = homogeneous_monomials(2);
      p2bf.insert(p2bf.end(), Bf.begin(), Bf.end());
      add(product_span(Bf, p2bf));
      auto enrich = homogeneous_monomials(2);
      enrich.insert(enrich.end(), Bf.begin(), Bf.end());
      enrich.insert(enrich.end(), Be.begin(), Be.end());
      add(product_span(Be, enrich));
      break;
    }
  }

  ElementSpace space;
  space.id = id;
  space.degree = element_degree(id);
  auto monos = dedupe_monomials(span);
  space.basis = independent_subset(monos, 1e-9);
  space.dim = static_cast<int>(space.basis.size());
  if (space.dim != element_node_count(id))
    throw std::logic_error(std::string("element space dimension mismatch for ") + element_name(id) +
                           ": got " + std::to_string(space.dim));

  // Orbit representatives of the spanning monomials (for reporting).
  std::set<MonoKey> patterns;
  for (auto& m : monos) patterns.insert(sorted_pattern(m.terms().front().first));
  space.generators.label = std::string(element_name(id)) + " space";
  for (MonoKey k : patterns) {
    auto m = mono_unkey(k);
    space.generators.generators.push_back(BaryPoly::monomial(m.e[0], m.e[1], m.e[2], m.e[3]));
  }
  return space;
}

std::vector<BaryPoly> derivative_space(const ElementSpace& space) {
  std::vector<BaryPoly> out;
  for (auto& b : space.basis)
    for (int d = 0; d < 3; ++d) {
      BaryPoly g = b.cartesian_derivative(d);
      if (!g.empty()) out.push_back(std::move(g));
    }
  return out;
}

int NodeSet::count() const {
  int n = 0;
  for (auto& o : orbits) n += o.size();
  return n;
}

std::vector<Bary> NodeSet::points() const {
  std::vector<Bary> out;
  for (auto& o : orbits)
    for (auto& p : expand_orbit(o)) out.push_back(p);
  return out;
}

std::vector<int> NodeSet::orbit_of_point() const {
  std::vector<int> out;
  for (size_t i = 0; i < orbits.size(); ++i)
    for (int j = 0; j < orbits[i].size(); ++j) out.push_back(static_cast<int>(i));
  return out;
}

NodalBasis build_nodal_basis(const ElementSpace& space, const NodeSet& nodes) {
  const int n = space.dim;
  if (nodes.count() != n)
    throw NotUnisolvent("node count " + std::to_string(nodes.count()) + " != space dimension " +
                        std::to_string(n));
  NodalBasis basis;
  basis.nodes = nodes.points();

  Eigen::MatrixXd V(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) V(i, j) = space.basis[j].eval(basis.nodes[i]);

  Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) throw NotUnisolvent("Vandermonde matrix numerically singular");

  Eigen::MatrixXd C = lu.solve(Eigen::MatrixXd::Identity(n, n));
  C += lu.solve(Eigen::MatrixXd::Identity(n, n) - V * C);  // one refinement step

  basis.condition = V.cwiseAbs().rowwise().sum().maxCoeff() * C.cwiseAbs().rowwise().sum().maxCoeff();
  basis.delta_residual = (V * C - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  if (basis.delta_residual > 1e-9) throw NotUnisolvent("nodal basis residual too large");

  basis.w.resize(n);
  for (int i = 0; i < n; ++i) {
    BaryPoly w;
    for (int j = 0; j < n; ++j) {
      if (C(j, i) != 0.0) w += space.basis[j] * C(j, i);
    }
    w.compress(0.0);
    basis.w[i] = std::move(w);
  }
  return basis;
}

namespace {

std::vector<std::string> data_search_dirs() {
  std::vector<std::string> dirs;
  if (const char* env = std::getenv("MLTET_DATA_DIR")) dirs.push_back(env);
  dirs.push_back("data");
  return dirs;
}

std::optional<std::string> find_mass_data_file(ElementId id) {
  const std::string fname = std::string(element_name(id)) + "_mass.json";
  for (auto& dir : data_search_dirs()) {
    std::filesystem::path p = std::filesystem::path(dir) / fname;
    if (std::filesystem::exists(p)) return p.string();
  }
  return std::nullopt;
}

}  // namespace

NodeSet mass_node_set(ElementId id) {
  if (id == ElementId::P2N15) {
    NodeSet nodes;
    nodes.orbits = {
        {OrbitType::T31, {0.0}},        // vertices
        {OrbitType::T22, {0.5}},        // edge midpoints
        {OrbitType::T31, {1.0 / 3.0}},  // face centroids
        {OrbitType::T4, {}},            // centre
    };
    return nodes;
  }
  auto path = find_mass_data_file(id);
  if (!path)
    throw MissingElementData(std::string("no mass node data for ") + element_name(id) +
                             " (searched MLTET_DATA_DIR and ./data)");
  return load_element_data(*path).nodes;
}

bool mass_data_available(ElementId id) {
  if (id == ElementId::P2N15) return true;
  auto path = find_mass_data_file(id);
  if (!path) return false;
  try {
    load_element_data(*path);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

namespace {

// Independent symmetric moments of P_{p-2} (x) U (constants only for p < 2).
std::vector<BaryPoly> mass_moment_basis(const ElementSpace& space) {
  if (space.degree < 2) return {BaryPoly::constant(1.0)};
  auto products = product_span(homogeneous_monomials(space.degree - 2), space.basis);
  std::set<MonoKey> patterns;
  for (auto& p : products)
    for (auto& [k, c] : p.terms()) patterns.insert(sorted_pattern(k));
  std::vector<BaryPoly> symmetric;
  for (MonoKey k : patterns) {
    auto m = mono_unkey(k);
    BaryPoly s;
    for (auto& img : expand_generator(BaryPoly::monomial(m.e[0], m.e[1], m.e[2], m.e[3]))) s += img;
    symmetric.push_back(std::move(s));
  }
  return independent_subset(symmetric, 1e-9);
}

}  // namespace

std::vector<double> derive_mass_weights(const ElementSpace& space, const NodeSet& nodes) {
  // One unknown weight per orbit; equations from the symmetric moments.
  std::vector<std::vector<Bary>> orbitPoints;
  for (auto& o : nodes.orbits) orbitPoints.push_back(expand_orbit(o));
  const int nOrbits = static_cast<int>(nodes.orbits.size());

  auto moments = mass_moment_basis(space);
  const int m = static_cast<int>(moments.size());
  Eigen::MatrixXd A(m, nOrbits);
  Eigen::VectorXd b(m);
  double scale = 0;
  for (int i = 0; i < m; ++i) {
    b(i) = moments[i].integral();
    scale = std::max(scale, std::abs(b(i)));
    for (int o = 0; o < nOrbits; ++o) {
      double s = 0;
      for (auto& p : orbitPoints[o]) s += moments[i].eval(p);
      A(i, o) = s;
    }
  }
  Eigen::VectorXd w = A.colPivHouseholderQr().solve(b);
  double residual = (A * w - b).lpNorm<Eigen::Infinity>();
  if (residual > 1e-10 * std::max(1.0, scale))
    throw SystemInconsistent("mass weight system residual " + std::to_string(residual));
  for (int o = 0; o < nOrbits; ++o)
    if (!(w(o) > 0)) throw NoPositiveSolution("nonpositive mass weight in orbit " + std::to_string(o));

  std::vector<double> perNode;
  for (int o = 0; o < nOrbits; ++o)
    for (int j = 0; j < nodes.orbits[o].size(); ++j) perNode.push_back(w(o));
  return perNode;
}

bool check_face_conforming(const ElementSpace& space, const NodeSet& nodes, int samplesPerFace,
                           double tol) {
  NodalBasis basis;
  try {
    basis = build_nodal_basis(space, nodes);
  } catch (const NotUnisolvent&) {
    return false;
  }
  std::mt19937_64 rng(20240901);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = static_cast<int>(basis.w.size());
  for (int face = 0; face < 4; ++face) {
    std::vector<int> offFace;
    for (int i = 0; i < n; ++i)
      if (basis.nodes[i][face] > 1e-12) offFace.push_back(i);
    for (int s = 0; s < samplesPerFace; ++s) {
      // Uniform barycentric point on the face (coordinate `face` = 0).
      double a = unit(rng), b = unit(rng);
      if (a + b > 1) {
        a = 1 - a;
        b = 1 - b;
      }
      double coords[3] = {a, b, 1 - a - b};
      Bary p{0, 0, 0, 0};
      int t = 0;
      for (int j = 0; j < 4; ++j)
        if (j != face) p[j] = coords[t++];
      for (int i : offFace)
        if (std::abs(basis.w[i].eval(p)) > tol) return false;
    }
  }
  return true;
}

SpuriousScreen check_spurious_free(const std::vector<BaryPoly>& basis, const QuadratureRule& rule,
                                   FieldMode mode) {
  const int n = static_cast<int>(basis.size());
  auto pts = rule.points();
  const int nq = static_cast<int>(pts.size());

  Eigen::MatrixXd G;
  if (mode == FieldMode::Scalar) {
    G.resize(3 * nq, n);
    for (int i = 0; i < n; ++i) {
      std::array<BaryPoly, 3> grad{basis[i].cartesian_derivative(0), basis[i].cartesian_derivative(1),
                                   basis[i].cartesian_derivative(2)};
      for (int k = 0; k < nq; ++k)
        for (int d = 0; d < 3; ++d) G(3 * k + d, i) = grad[d].eval(pts[k].first);
    }
  } else {
    G.setZero(6 * nq, 3 * n);
    for (int i = 0; i < n; ++i) {
      std::array<BaryPoly, 3> grad{basis[i].cartesian_derivative(0), basis[i].cartesian_derivative(1),
                                   basis[i].cartesian_derivative(2)};
      for (int k = 0; k < nq; ++k) {
        std::array<double, 3> g{grad[0].eval(pts[k].first), grad[1].eval(pts[k].first),
                                grad[2].eval(pts[k].first)};
        for (int v = 0; v < 3; ++v) {
          int col = v * n + i;
          int row = 6 * k;
          // symmetric strain components (0,0),(1,1),(2,2),(0,1),(0,2),(1,2)
          G(row + 0, col) += (v == 0) ? 2 * g[0] : 0;
          G(row + 1, col) += (v == 1) ? 2 * g[1] : 0;
          G(row + 2, col) += (v == 2) ? 2 * g[2] : 0;
          G(row + 3, col) += (v == 0) ? g[1] : (v == 1) ? g[0] : 0;
          G(row + 4, col) += (v == 0) ? g[2] : (v == 2) ? g[0] : 0;
          G(row + 5, col) += (v == 1) ? g[2] : (v == 2) ? g[1] : 0;
        }
      }
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-8 * smax) ++rank;

  SpuriousScreen result;
  result.nullspace_dim = static_cast<int>(G.cols()) - rank;
  result.pass = (mode == FieldMode::Scalar) ? (result.nullspace_dim == 1) : (result.nullspace_dim == 6);
  return result;
}

std::array<std::array<Eigen::MatrixXd, 3>, 3> precompute_B(const NodalBasis& basis) {
  const int n = static_cast<int>(basis.w.size());
  // Shared monomial index for all derivatives, with the exact Gram of
  // monomial-product integrals.
  std::array<std::vector<BaryPoly>, 3> deriv;
  std::map<MonoKey, int> columns;
  for (int d = 0; d < 3; ++d) {
    deriv[d].reserve(n);
    for (int i = 0; i < n; ++i) {
      deriv[d].push_back(basis.w[i].cartesian_derivative(d));
      for (auto& [k, c] : deriv[d].back().terms()) columns.emplace(k, 0);
    }
  }
  int m = 0;
  for (auto& [k, v] : columns) v = m++;
  std::vector<MonoKey> keys(m);
  for (auto& [k, v] : columns) keys[v] = k;

  Eigen::MatrixXd P(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = a; b < m; ++b) {
      P(a, b) = P(b, a) = integrate_monomial(mono_unkey(keys[a] + keys[b]));
    }

  std::array<Eigen::MatrixXd, 3> E;
  for (int d = 0; d < 3; ++d) {
    E[d] = Eigen::MatrixXd::Zero(n, m);
    for (int i = 0; i < n; ++i)
      for (auto& [k, c] : deriv[d][i].terms()) E[d](i, columns[k]) = c;
  }

  std::array<std::array<Eigen::MatrixXd, 3>, 3> B;
  for (int d = 0; d < 3; ++d) {
    Eigen::MatrixXd PE = P * E[d].transpose();
    for (int e = 0; e < 3; ++e) B[e][d] = E[e] * PE;
  }
  return B;
}

std::array<Eigen::MatrixXd, 3> precompute_D(const NodalBasis& basis, const QuadratureRule& rule) {
  const int n = static_cast<int>(basis.w.size());
  auto pts = rule.points();
  const int nq = static_cast<int>(pts.size());
  std::array<Eigen::MatrixXd, 3> D;
  for (int d = 0; d < 3; ++d) D[d].resize(nq, n);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < 3; ++d) {
      BaryPoly g = basis.w[i].cartesian_derivative(d);
      for (int k = 0; k < nq; ++k) D[d](k, i) = g.eval(pts[k].first);
    }
  return D;
}

KernelTables build_kernel_tables(ElementId id, const QuadratureRule* rule) {
  ElementSpace space = element_space(id);
  NodeSet nodes = mass_node_set(id);
  NodalBasis basis = build_nodal_basis(space, nodes);

  KernelTables t;
  t.id = id;
  t.n = space.dim;
  t.rule = rule ? *rule : builtin_stiffness_rule(id);
  t.nodes = nodes;
  t.node_points = basis.nodes;
  auto pts = t.rule.points();
  t.nq = static_cast<int>(pts.size());
  t.rule_points.reserve(pts.size());
  t.rule_weights.resize(t.nq);
  for (int k = 0; k < t.nq; ++k) {
    t.rule_points.push_back(pts[k].first);
    t.rule_weights(k) = pts[k].second;
  }

  t.B = precompute_B(basis);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j <= i; ++j) t.Bhat[i][j] = (i == j) ? t.B[i][j] : Eigen::MatrixXd(t.B[i][j] + t.B[j][i]);
  t.D = precompute_D(basis, t.rule);

  auto w = derive_mass_weights(space, nodes);
  t.mass_weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<int>(w.size()));
  return t;
}

const KernelTables& kernel_tables(ElementId id, const std::string& ruleLabel) {
  static std::map<std::pair<int, std::string>, KernelTables> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto key = std::make_pair(static_cast<int>(id), ruleLabel);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  if (ruleLabel.empty() || ruleLabel == builtin_stiffness_rule(id).label) {
    return cache.emplace(key, build_kernel_tables(id)).first->second;
  }
  QuadratureRule mr = mass_rule(id);
  if (ruleLabel == mr.label) {
    return cache.emplace(key, build_kernel_tables(id, &mr)).first->second;
  }
  throw std::invalid_argument("unknown rule label for " + std::string(element_name(id)) + ": " + ruleLabel);
}

QuadratureRule mass_rule(ElementId id) {
  ElementSpace space = element_space(id);
  NodeSet nodes = mass_node_set(id);
  auto w = derive_mass_weights(space, nodes);
  QuadratureRule rule;
  rule.label = "q" + std::to_string(nodes.count());
  int idx = 0;
  for (auto& o : nodes.orbits) {
    rule.entries.push_back({o, w[idx]});
    idx += o.size();
  }
  return rule;
}

void write_element_data(const std::string& path, const ElementData& data, const std::string& label) {
  json j;
  j["element_id"] = element_name(data.id);
  j["role"] = data.role;
  if (!label.empty()) j["label"] = label;
  j["orbits"] = json::array();
  for (size_t o = 0; o < data.nodes.orbits.size(); ++o) {
    json e;
    e["type"] = orbit_type_name(data.nodes.orbits[o].type);
    e["params"] = data.nodes.orbits[o].params;
    e["weight"] = data.orbit_weights[o];
    j["orbits"].push_back(e);
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

ElementData load_element_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  ElementData data;
  try {
    data.id = parse_element_id(j.at("element_id").get<std::string>());
    data.role = j.value("role", "mass");
    for (auto& o : j.at("orbits")) {
      SymmetricOrbit orbit;
      orbit.type = orbit_type_from_name(o.at("type").get<std::string>());
      orbit.params = o.at("params").get<std::vector<double>>();
      data.nodes.orbits.push_back(orbit);
      data.orbit_weights.push_back(o.at("weight").get<double>());
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  if (data.role == "mass") {
    ElementSpace space = element_space(data.id);
    if (data.nodes.count() != space.dim)
      throw ParseError(path + ": node count does not match element dimension");
    build_nodal_basis(space, data.nodes);  // C1; throws NotUnisolvent
    if (!check_face_conforming(space, data.nodes)) throw ParseError(path + ": C3 face conformity failed");
    for (double w : data.orbit_weights)
      if (!(w > 0)) throw ParseError(path + ": C4 positivity failed");
    // C5: stored weights must integrate the moment space exactly.
    auto moments = mass_moment_basis(space);
    auto perOrbit = data.nodes.orbits;
    for (auto& mu : moments) {
      double exact = mu.integral();
      double quad = 0;
      for (size_t o = 0; o < perOrbit.size(); ++o)
        for (auto& p : expand_orbit(perOrbit[o])) quad += data.orbit_weights[o] * mu.eval(p);
      if (std::abs(exact - quad) > 1e-9 * std::max(1.0, std::abs(exact)))
        throw ParseError(path + ": C5 accuracy failed");
    }
  }
  return data;
}

// ---- mass element search ---------------------------------------------------

std::vector<NodeOrbitSpec> p3n32_mass_ansatz() {
  std::vector<NodeOrbitSpec> specs(4);
  specs[0] = {OrbitType::T31, {0.0}, {{}}};                  // vertices
  specs[1] = {OrbitType::T211, {0.0, 0.0}, {{0.0}, {1.0}}};  // edge pair (0,0,t)
  specs[2] = {OrbitType::T211, {0.0, 1.0}, {{1.0}, {-2.0}}}; // face points (a,a,1-2a,0)
  specs[3] = {OrbitType::T31, {0.0}, {{1.0}}};               // interior line points
  return specs;
}

std::vector<NodeOrbitSpec> p4_mass_ansatz(ElementId id) {
  if (element_degree(id) != 4) throw UnknownElement("degree-4 ansatz requested for a non-degree-4 id");
  std::vector<NodeOrbitSpec> specs;
  specs.push_back({OrbitType::T31, {0.0}, {{}}});                  // vertices
  specs.push_back({OrbitType::T22, {0.5}, {{}}});                  // edge midpoints
  specs.push_back({OrbitType::T211, {0.0, 0.0}, {{0.0}, {1.0}}});  // edge pair (0,0,t)
  specs.push_back({OrbitType::T211, {0.0, 1.0}, {{1.0}, {-2.0}}}); // face points (a1,a1,1-2a1,0)
  specs.push_back({OrbitType::T211, {0.0, 1.0}, {{1.0}, {-2.0}}}); // face points (a2,a2,1-2a2,0)
  specs.push_back({OrbitType::T31, {0.0}, {{1.0}}});               // interior line points
  specs.push_back({OrbitType::T31, {0.0}, {{1.0}}});               // interior line points
  specs.push_back({OrbitType::T22, {0.0}, {{1.0}}});               // interior edge-axis points
  if (id == ElementId::P4N61 || id == ElementId::P4N65)
    specs.push_back({OrbitType::T4, {}, {}});                      // centre
  if (id == ElementId::P4N65)
    specs.push_back({OrbitType::T31, {1.0 / 3.0}, {{}}});          // face centroids
  return specs;
}

namespace {

std::vector<double> spec_params(const NodeOrbitSpec& spec, const Eigen::VectorXd& theta, int offset) {
  std::vector<double> params = spec.offset;
  for (size_t r = 0; r < params.size(); ++r)
    for (int c = 0; c < spec.free_count(); ++c) params[r] += spec.coeff[r][c] * theta(offset + c);
  return params;
}

}  // namespace

MassFindResult find_mass_element(const ElementSpace& space, const std::vector<NodeOrbitSpec>& specs,
                                 const MassFindOptions& opts) {
  const int nOrbits = static_cast<int>(specs.size());
  int nFree = 0;
  for (auto& s : specs) nFree += s.free_count();
  const int nUnknown = nOrbits + nFree;

  auto moments = mass_moment_basis(space);
  const int m = static_cast<int>(moments.size());
  std::vector<std::array<BaryPoly, 4>> momentGrads;
  std::vector<double> exact;
  for (auto& mu : moments) {
    exact.push_back(mu.integral());
    momentGrads.push_back({mu.bary_derivative(0), mu.bary_derivative(1), mu.bary_derivative(2),
                           mu.bary_derivative(3)});
  }

  auto orbitTangentsOf = [](OrbitType t) -> std::vector<Bary> {
    switch (t) {
      case OrbitType::T4: return {};
      case OrbitType::T31: return {{1, 1, 1, -3}};
      case OrbitType::T22: return {{1, 1, -1, -1}};
      case OrbitType::T211: return {{1, 1, 0, -2}, {0, 0, 1, -1}};
      case OrbitType::T1111: return {{1, 0, 0, -1}, {0, 1, 0, -1}, {0, 0, 1, -1}};
    }
    return {};
  };

  MassFindResult result;
  int totalNodes = 0;
  for (auto& s : specs) totalNodes += orbit_size(s.type);
  if (totalNodes != space.dim) return result;

  // Residual and Jacobian of the moment system; false on orbit collapse.
  auto evaluate = [&](const Eigen::VectorXd& xv, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    r.setZero(m);
    if (J) J->setZero(m, nUnknown);
    int freeOff = nOrbits;
    for (int o = 0; o < nOrbits; ++o) {
      SymmetricOrbit orbit{specs[o].type, spec_params(specs[o], xv, freeOff)};
      std::vector<std::pair<Bary, std::array<int, 4>>> pts;
      try {
        pts = expand_orbit_with_maps(orbit);
      } catch (const DegenerateOrbit&) {
        return false;
      }
      auto tangents = orbitTangentsOf(specs[o].type);
      for (int i = 0; i < m; ++i) {
        double sumF = 0;
        std::vector<double> dTheta(specs[o].free_count(), 0.0);
        for (auto& [p, map] : pts) {
          sumF += moments[i].eval(p);
          if (J) {
            for (int c = 0; c < specs[o].free_count(); ++c) {
              // representative tangent for free variable c
              Bary rt{0, 0, 0, 0};
              for (size_t rr = 0; rr < specs[o].offset.size(); ++rr)
                for (int k = 0; k < 4; ++k) rt[k] += specs[o].coeff[rr][c] * tangents[rr][k];
              Bary dir = apply_permutation(map, rt);
              double dot = 0;
              for (int k = 0; k < 4; ++k) dot += momentGrads[i][k].eval(p) * dir[k];
              dTheta[c] += dot;
            }
          }
        }
        r(i) += xv(o) * sumF;
        if (J) {
          (*J)(i, o) += sumF;
          for (int c = 0; c < specs[o].free_count(); ++c) (*J)(i, freeOff + c) += xv(o) * dTheta[c];
        }
      }
      freeOff += specs[o].free_count();
    }
    for (int i = 0; i < m; ++i) r(i) -= exact[i];
    return true;
  };

  for (int trial = 0; trial < opts.max_trials; ++trial) {
    result.trials = trial + 1;
    std::mt19937_64 rng(opts.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(trial));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Eigen::VectorXd x(nUnknown);
    x.head(nOrbits).setZero();
    if (static_cast<int>(opts.location_guess.size()) == nFree) {
      for (int f = 0; f < nFree; ++f)
        x(nOrbits + f) = opts.location_guess[f] + opts.location_jitter * (2 * unit(rng) - 1);
    } else {
      for (int f = 0; f < nFree; ++f) x(nOrbits + f) = 0.03 + 0.42 * unit(rng);
    }

    Eigen::VectorXd r(m), rNext(m);
    Eigen::MatrixXd J(m, nUnknown);
    if (!evaluate(x, r, &J)) {
      ++result.diverged;
      continue;
    }
    // Weights enter the moments linearly; start from the least-squares
    // weights of the drawn locations (the weight columns of J are their
    // coefficient matrix, and r = -exact at zero weights).
    x.head(nOrbits) = J.leftCols(nOrbits).colPivHouseholderQr().solve(-r);
    if (!evaluate(x, r, &J)) {
      ++result.diverged;
      continue;
    }
    bool converged = false;
    for (int it = 0; it < opts.max_newton_iters; ++it) {
      double rn = r.lpNorm<Eigen::Infinity>();
      result.best_residual = std::min(result.best_residual, rn);
      if (rn < opts.residual_tol) {
        converged = true;
        result.final_residual = rn;
        break;
      }
      Eigen::VectorXd dx = J.colPivHouseholderQr().solve(-r);  // Newton / Gauss-Newton
      if (!dx.allFinite() || dx.lpNorm<Eigen::Infinity>() > 1e6) break;
      double rn2 = r.norm();
      double step = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < 12; ++bt) {
        Eigen::VectorXd xTry = x + step * dx;
        if (evaluate(xTry, rNext, &J) && rNext.norm() < rn2) {
          x = xTry;
          r = rNext;
          accepted = true;
          break;
        }
        step /= 2;
      }
      if (!accepted) {
        // Levenberg-Marquardt fallback; the Jacobian can be singular at the
        // solution when the admissible set is a positive-dimensional family.
        Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::VectorXd Jtr = J.transpose() * r;
        double mu = 1e-12 * std::max(1.0, JtJ.diagonal().maxCoeff());
        for (int lm = 0; lm < 40 && !accepted; ++lm) {
          Eigen::MatrixXd A = JtJ + mu * Eigen::MatrixXd::Identity(nUnknown, nUnknown);
          Eigen::VectorXd dxlm = A.ldlt().solve(-Jtr);
          Eigen::VectorXd xTry = x + dxlm;
          if (evaluate(xTry, rNext, &J) && rNext.norm() < rn2) {
            x = xTry;
            r = rNext;
            accepted = true;
          } else {
            mu *= 10;
          }
        }
      }
      if (!accepted) break;
    }
    if (!converged) {
      ++result.diverged;
      continue;
    }

    // Assemble and screen: nodes inside, unisolvent, face-conforming, C4.
    NodeSet nodes;
    std::vector<double> weights;
    int freeOff = nOrbits;
    bool admissible = true;
    for (int o = 0; o < nOrbits; ++o) {
      SymmetricOrbit orbit{specs[o].type, spec_params(specs[o], x, freeOff)};
      freeOff += specs[o].free_count();
      nodes.orbits.push_back(orbit);
      weights.push_back(x(o));
      if (!(x(o) > 0)) admissible = false;
      try {
        for (auto& p : expand_orbit(orbit))
          if (!inside_closed(p, 1e-12)) admissible = false;
      } catch (const DegenerateOrbit&) {
        admissible = false;
      }
    }
    if (admissible) {
      try {
        build_nodal_basis(space, nodes);
      } catch (const NotUnisolvent&) {
        admissible = false;
      }
    }
    if (admissible) admissible = check_face_conforming(space, nodes);
    if (!admissible) {
      ++result.converged_inadmissible;
      continue;
    }
    result.found = true;
    result.nodes = nodes;
    result.orbit_weights = weights;
    return result;
  }
  return result;
}

}  // namespace mltet
