// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Barycentric geometry on the reference tetrahedron with vertices
// (0,0,0), (1,0,0), (0,1,0), (0,0,1). The barycentric coordinates are
// (x1, x2, x3, x4) with x4 = 1 - x1 - x2 - x3; the 24 affine self-maps
// of the element act as permutations of these four coordinates.

namespace mltet {

using Bary = std::array<double, 4>;

inline Bary bary(double x1, double x2, double x3) { return {x1, x2, x3, 1.0 - x1 - x2 - x3}; }

inline bool inside_closed(const Bary& p, double tol = 1e-12) {
  return p[0] >= -tol && p[1] >= -tol && p[2] >= -tol && p[3] >= -tol;
}

double bary_distance(const Bary& a, const Bary& b);

// All 24 permutations of {0,1,2,3}, identity first, fixed order.
const std::array<std::array<int, 4>, 24>& tet_symmetries();

inline Bary apply_permutation(const std::array<int, 4>& s, const Bary& p) {
  // Image point: coordinate i of the result reads coordinate s[i] of p.
  return {p[s[0]], p[s[1]], p[s[2]], p[s[3]]};
}

enum class OrbitType : int { T4 = 0, T31, T22, T211, T1111 };

int orbit_size(OrbitType t);
int orbit_param_count(OrbitType t);
const char* orbit_type_name(OrbitType t);      // "[4]", "[3,1]", ...
OrbitType orbit_type_from_name(const std::string& name);

struct DegenerateOrbit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One equivalence class of points under the 24 symmetries, described by its
// type and location parameters:
//   [4]        ()            -> (1/4, 1/4, 1/4, 1/4)
//   [3,1]      (c)           -> (c, c, c, 1-3c)
//   [2,2]      (d)           -> (d, d, 1/2-d, 1/2-d)
//   [2,1,1]    (f1, f2)      -> (f1, f1, f2, 1-2f1-f2)
//   [1,1,1,1]  (g1, g2, g3)  -> (g1, g2, g3, 1-g1-g2-g3)
struct SymmetricOrbit {
  OrbitType type = OrbitType::T4;
  std::vector<double> params;

  Bary representative() const;
  int size() const { return orbit_size(type); }
};

// Distinct points of the orbit; throws DegenerateOrbit if parameters collapse
// points within 1e-12 (e.g. [3,1] with c = 1/4).
std::vector<Bary> expand_orbit(const SymmetricOrbit& orbit);

// As above but also reports, for each distinct point, one permutation mapping
// the representative onto it (used for analytic Jacobians of point motion).
std::vector<std::pair<Bary, std::array<int, 4>>> expand_orbit_with_maps(const SymmetricOrbit& orbit);

// Inverse of expand_orbit for a single point: the coarsest type consistent
// with the coordinate multiplicities within tol, with canonical parameters
// ([2,2]: d <= 1/4; [2,1,1]: f2 = smaller unpaired value; [1,1,1,1]: sorted).
SymmetricOrbit classify_point(const Bary& p, double tol = 1e-9);

struct MonomialExponent {
  std::array<int, 4> e{0, 0, 0, 0};
  int degree() const { return e[0] + e[1] + e[2] + e[3]; }
};

// Exact integral of x1^a x2^b x3^c x4^d over the reference tetrahedron:
// a! b! c! d! / (a+b+c+d+3)!, evaluated by multiplicative recurrence so that
// no factorial overflows for the degrees used here.
double integrate_monomial(const MonomialExponent& m);

}  // namespace mltet
