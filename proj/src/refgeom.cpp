// SPDX-License-Identifier: Apache-2.0
#include "mltet/refgeom.hpp"

#include <algorithm>
#include <cmath>

namespace mltet {

double bary_distance(const Bary& a, const Bary& b) {
  double s = 0;
  for (int i = 0; i < 4; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

const std::array<std::array<int, 4>, 24>& tet_symmetries() {
  static const std::array<std::array<int, 4>, 24> perms = [] {
    std::array<std::array<int, 4>, 24> out{};
    std::array<int, 4> p{0, 1, 2, 3};
    int k = 0;
    do {
      out[k++] = p;
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
  }();
  return perms;
}

int orbit_size(OrbitType t) {
  switch (t) {
    case OrbitType::T4: return 1;
    case OrbitType::T31: return 4;
    case OrbitType::T22: return 6;
    case OrbitType::T211: return 12;
    case OrbitType::T1111: return 24;
  }
  return 0;
}

int orbit_param_count(OrbitType t) {
  switch (t) {
    case OrbitType::T4: return 0;
    case OrbitType::T31: return 1;
    case OrbitType::T22: return 1;
    case OrbitType::T211: return 2;
    case OrbitType::T1111: return 3;
  }
  return 0;
}

const char* orbit_type_name(OrbitType t) {
  switch (t) {
    case OrbitType::T4: return "[4]";
    case OrbitType::T31: return "[3,1]";
    case OrbitType::T22: return "[2,2]";
    case OrbitType::T211: return "[2,1,1]";
    case OrbitType::T1111: return "[1,1,1,1]";
  }
  return "?";
}

OrbitType orbit_type_from_name(const std::string& name) {
  for (OrbitType t : {OrbitType::T4, OrbitType::T31, OrbitType::T22, OrbitType::T211, OrbitType::T1111})
    if (name == orbit_type_name(t)) return t;
  throw std::invalid_argument("unknown orbit type: " + name);
}

Bary SymmetricOrbit::representative() const {
  if (static_cast<int>(params.size()) != orbit_param_count(type))
    throw std::invalid_argument("orbit parameter count mismatch");
  switch (type) {
    case OrbitType::T4: return {0.25, 0.25, 0.25, 0.25};
    case OrbitType::T31: {
      double c = params[0];
      return {c, c, c, 1.0 - 3.0 * c};
    }
    case OrbitType::T22: {
      double d = params[0];
      return {d, d, 0.5 - d, 0.5 - d};
    }
    case OrbitType::T211: {
      double f1 = params[0], f2 = params[1];
      return {f1, f1, f2, 1.0 - 2.0 * f1 - f2};
    }
    case OrbitType::T1111: {
      double g1 = params[0], g2 = params[1], g3 = params[2];
      return {g1, g2, g3, 1.0 - g1 - g2 - g3};
    }
  }
  throw std::logic_error("unreachable");
}

std::vector<std::pair<Bary, std::array<int, 4>>> expand_orbit_with_maps(const SymmetricOrbit& orbit) {
  const Bary rep = orbit.representative();
  std::vector<std::pair<Bary, std::array<int, 4>>> out;
  out.reserve(orbit.size());
  for (const auto& s : tet_symmetries()) {
    Bary q = apply_permutation(s, rep);
    bool seen = false;
    for (const auto& [p, m] : out)
      if (p == q) {  // permutations of identical values give bit-equal tuples
        seen = true;
        break;
      }
    if (!seen) out.emplace_back(q, s);
  }
  if (static_cast<int>(out.size()) != orbit.size())
    throw DegenerateOrbit(std::string("orbit of type ") + orbit_type_name(orbit.type) +
                          " collapsed to " + std::to_string(out.size()) + " points");
  for (size_t i = 0; i < out.size(); ++i)
    for (size_t j = i + 1; j < out.size(); ++j)
      if (bary_distance(out[i].first, out[j].first) < 1e-12)
        throw DegenerateOrbit("orbit points coincide within 1e-12");
  return out;
}

std::vector<Bary> expand_orbit(const SymmetricOrbit& orbit) {
  auto withMaps = expand_orbit_with_maps(orbit);
  std::vector<Bary> out;
  out.reserve(withMaps.size());
  for (auto& [p, m] : withMaps) out.push_back(p);
  return out;
}

SymmetricOrbit classify_point(const Bary& p, double tol) {
  // Group the four coordinates by closeness within tol.
  std::array<double, 4> v = p;
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, int>> groups;  // (value, multiplicity)
  for (double x : v) {
    if (!groups.empty() && std::abs(x - groups.back().first) <= tol)
      groups.back().second++;
    else
      groups.emplace_back(x, 1);
  }
  std::vector<int> mult;
  for (auto& g : groups) mult.push_back(g.second);
  std::sort(mult.begin(), mult.end(), std::greater<int>());

  SymmetricOrbit orbit;
  if (mult == std::vector<int>{4}) {
    orbit.type = OrbitType::T4;
  } else if (mult == std::vector<int>{3, 1}) {
    orbit.type = OrbitType::T31;
    for (auto& g : groups)
      if (g.second == 3) orbit.params = {g.first};
  } else if (mult == std::vector<int>{2, 2}) {
    orbit.type = OrbitType::T22;
    orbit.params = {std::min(groups[0].first, groups[1].first)};
  } else if (mult == std::vector<int>{2, 1, 1}) {
    orbit.type = OrbitType::T211;
    double f1 = 0;
    std::vector<double> singles;
    for (auto& g : groups) {
      if (g.second == 2)
        f1 = g.first;
      else
        singles.push_back(g.first);
    }
    orbit.params = {f1, std::min(singles[0], singles[1])};
  } else {
    orbit.type = OrbitType::T1111;
    orbit.params = {v[0], v[1], v[2]};
  }
  return orbit;
}

double integrate_monomial(const MonomialExponent& m) {
  double value = 1.0 / 6.0;  // volume of the reference tetrahedron
  int denom = 3;
  for (int i = 0; i < 4; ++i)
    for (int j = 1; j <= m.e[i]; ++j) {
      ++denom;
      value *= static_cast<double>(j) / static_cast<double>(denom);
    }
  return value;
}

}  // namespace mltet
