// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mltet/refgeom.hpp"

// Sparse polynomials in the four barycentric coordinates. Two polynomials are
// equal as functions on R^3 iff their homogenizations to a common degree
// (multiplying terms by powers of x1+x2+x3+x4 = 1) have equal coefficients,
// which reduces span and rank questions to plain linear algebra over the
// homogeneous monomial basis.

namespace mltet {

// Exponents packed 8 bits per coordinate, (a,b,c,d) -> a<<24 | b<<16 | c<<8 | d.
using MonoKey = std::uint32_t;

inline MonoKey mono_key(int a, int b, int c, int d) {
  return (static_cast<MonoKey>(a) << 24) | (static_cast<MonoKey>(b) << 16) |
         (static_cast<MonoKey>(c) << 8) | static_cast<MonoKey>(d);
}
inline MonomialExponent mono_unkey(MonoKey k) {
  return MonomialExponent{{static_cast<int>(k >> 24) & 255, static_cast<int>(k >> 16) & 255,
                           static_cast<int>(k >> 8) & 255, static_cast<int>(k) & 255}};
}
inline int mono_degree(MonoKey k) {
  auto m = mono_unkey(k);
  return m.degree();
}

class BaryPoly {
 public:
  BaryPoly() = default;
  static BaryPoly monomial(int a, int b, int c, int d, double coeff = 1.0);
  static BaryPoly constant(double value);

  // Terms sorted by key, nonzero coefficients only.
  const std::vector<std::pair<MonoKey, double>>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  int max_degree() const;

  BaryPoly& operator+=(const BaryPoly& o);
  BaryPoly& operator*=(double s);
  friend BaryPoly operator+(BaryPoly a, const BaryPoly& b) { return a += b; }
  friend BaryPoly operator*(BaryPoly a, double s) { return a *= s; }
  friend BaryPoly operator*(double s, BaryPoly a) { return a *= s; }
  BaryPoly operator*(const BaryPoly& o) const;

  double eval(const Bary& p) const;
  // Gradient entry in barycentric direction j (all four treated independent).
  BaryPoly bary_derivative(int j) const;
  // Cartesian derivative dir in {0,1,2}, using x4 = 1 - x1 - x2 - x3.
  BaryPoly cartesian_derivative(int dir) const;
  double integral() const;  // exact, over the reference tetrahedron
  BaryPoly permuted(const std::array<int, 4>& s) const;
  BaryPoly symmetrized() const;  // average over the 24 coordinate permutations
  // Multiply by (x1+x2+x3+x4)^k so every term reaches degree targetDegree.
  BaryPoly homogenized(int targetDegree) const;

  void add_term(MonoKey key, double coeff);
  void compress(double dropTol = 0.0);

 private:
  std::vector<std::pair<MonoKey, double>> terms_;
};

std::vector<BaryPoly> expand_generator(const BaryPoly& g);  // distinct permuted images

// Dense coefficient matrix (one row per polynomial) over the homogeneous
// monomial basis of the common maximum degree; column order is ascending key.
Eigen::MatrixXd homogeneous_coeff_matrix(const std::vector<BaryPoly>& polys, int* degreeOut = nullptr);

int span_rank(const std::vector<BaryPoly>& polys, double relTol = 1e-9);

// True iff every candidate lies in the span of `space` (rank test at relTol).
bool span_contains(const std::vector<BaryPoly>& space, const std::vector<BaryPoly>& candidates,
                   double relTol = 1e-9);

// Maximal linearly independent subset, chosen by column-pivoted QR.
std::vector<BaryPoly> independent_subset(const std::vector<BaryPoly>& polys, double relTol = 1e-9);

// All homogeneous barycentric monomials of the given total degree; their span
// equals the Cartesian polynomial space P_degree.
std::vector<BaryPoly> homogeneous_monomials(int degree);

// Pairwise products of two spanning lists.
std::vector<BaryPoly> product_span(const std::vector<BaryPoly>& a, const std::vector<BaryPoly>& b);

}  // namespace mltet
