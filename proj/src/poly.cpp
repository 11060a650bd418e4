// SPDX-License-Identifier: Apache-2.0
#include "mltet/poly.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mltet {

BaryPoly BaryPoly::monomial(int a, int b, int c, int d, double coeff) {
  BaryPoly p;
  p.add_term(mono_key(a, b, c, d), coeff);
  return p;
}

BaryPoly BaryPoly::constant(double value) { return monomial(0, 0, 0, 0, value); }

int BaryPoly::max_degree() const {
  int deg = 0;
  for (auto& [k, c] : terms_) deg = std::max(deg, mono_degree(k));
  return deg;
}

void BaryPoly::add_term(MonoKey key, double coeff) {
  if (coeff == 0.0) return;
  auto it = std::lower_bound(terms_.begin(), terms_.end(), key,
                             [](const auto& t, MonoKey k) { return t.first < k; });
  if (it != terms_.end() && it->first == key) {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  } else {
    terms_.insert(it, {key, coeff});
  }
}

void BaryPoly::compress(double dropTol) {
  terms_.erase(std::remove_if(terms_.begin(), terms_.end(),
                              [&](const auto& t) { return std::abs(t.second) <= dropTol; }),
               terms_.end());
}

BaryPoly& BaryPoly::operator+=(const BaryPoly& o) {
  for (auto& [k, c] : o.terms_) add_term(k, c);
  return *this;
}

BaryPoly& BaryPoly::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [k, c] : terms_) c *= s;
  return *this;
}

BaryPoly BaryPoly::operator*(const BaryPoly& o) const {
  std::map<MonoKey, double> acc;
  for (auto& [ka, ca] : terms_)
    for (auto& [kb, cb] : o.terms_) acc[ka + kb] += ca * cb;  // packed exponents add fieldwise
  BaryPoly out;
  out.terms_.reserve(acc.size());
  for (auto& [k, c] : acc)
    if (c != 0.0) out.terms_.emplace_back(k, c);
  return out;
}

namespace {
inline double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}
}  // namespace

double BaryPoly::eval(const Bary& p) const {
  double s = 0;
  for (auto& [k, c] : terms_) {
    auto m = mono_unkey(k);
    s += c * ipow(p[0], m.e[0]) * ipow(p[1], m.e[1]) * ipow(p[2], m.e[2]) * ipow(p[3], m.e[3]);
  }
  return s;
}

BaryPoly BaryPoly::bary_derivative(int j) const {
  BaryPoly out;
  for (auto& [k, c] : terms_) {
    auto m = mono_unkey(k);
    if (m.e[j] == 0) continue;
    auto e = m.e;
    double coeff = c * e[j];
    e[j] -= 1;
    out.add_term(mono_key(e[0], e[1], e[2], e[3]), coeff);
  }
  return out;
}

BaryPoly BaryPoly::cartesian_derivative(int dir) const {
  BaryPoly out = bary_derivative(dir);
  out += bary_derivative(3) * (-1.0);
  return out;
}

double BaryPoly::integral() const {
  double s = 0;
  for (auto& [k, c] : terms_) s += c * integrate_monomial(mono_unkey(k));
  return s;
}

BaryPoly BaryPoly::permuted(const std::array<int, 4>& s) const {
  // x_i -> x_{s[i]} in the sense of apply_permutation: the image polynomial
  // q satisfies q(p) = this->eval(apply_permutation(s, p)).
  BaryPoly out;
  for (auto& [k, c] : terms_) {
    auto m = mono_unkey(k);
    std::array<int, 4> e{};
    for (int i = 0; i < 4; ++i) e[s[i]] += m.e[i];
    out.add_term(mono_key(e[0], e[1], e[2], e[3]), c);
  }
  return out;
}

BaryPoly BaryPoly::symmetrized() const {
  BaryPoly out;
  for (const auto& s : tet_symmetries()) out += permuted(s);
  out *= 1.0 / 24.0;
  return out;
}

BaryPoly BaryPoly::homogenized(int targetDegree) const {
  BaryPoly e1;
  for (int i = 0; i < 4; ++i) e1.add_term(mono_key(i == 0, i == 1, i == 2, i == 3), 1.0);
  BaryPoly out;
  for (auto& [k, c] : terms_) {
    BaryPoly t;
    t.add_term(k, c);
    int deficit = targetDegree - mono_degree(k);
    for (int i = 0; i < deficit; ++i) t = t * e1;
    out += t;
  }
  return out;
}

std::vector<BaryPoly> expand_generator(const BaryPoly& g) {
  std::vector<BaryPoly> out;
  for (const auto& s : tet_symmetries()) {
    BaryPoly q = g.permuted(s);
    bool seen = false;
    for (const auto& p : out)
      if (p.terms() == q.terms()) {
        seen = true;
        break;
      }
    if (!seen) out.push_back(std::move(q));
  }
  return out;
}

Eigen::MatrixXd homogeneous_coeff_matrix(const std::vector<BaryPoly>& polys, int* degreeOut) {
  int deg = 0;
  for (auto& p : polys) deg = std::max(deg, p.max_degree());
  if (degreeOut) *degreeOut = deg;
  std::map<MonoKey, int> columns;
  std::vector<BaryPoly> hom;
  hom.reserve(polys.size());
  for (auto& p : polys) {
    hom.push_back(p.homogenized(deg));
    for (auto& [k, c] : hom.back().terms()) columns.emplace(k, 0);
  }
  int idx = 0;
  for (auto& [k, v] : columns) v = idx++;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<int>(polys.size()), idx);
  for (int i = 0; i < static_cast<int>(hom.size()); ++i)
    for (auto& [k, c] : hom[i].terms()) A(i, columns[k]) = c;
  return A;
}

int span_rank(const std::vector<BaryPoly>& polys, double relTol) {
  if (polys.empty()) return 0;
  Eigen::MatrixXd A = homogeneous_coeff_matrix(polys);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(relTol);
  return static_cast<int>(qr.rank());
}

bool span_contains(const std::vector<BaryPoly>& space, const std::vector<BaryPoly>& candidates,
                   double relTol) {
  std::vector<BaryPoly> joint = space;
  joint.insert(joint.end(), candidates.begin(), candidates.end());
  return span_rank(joint, relTol) == span_rank(space, relTol);
}

std::vector<BaryPoly> independent_subset(const std::vector<BaryPoly>& polys, double relTol) {
  if (polys.empty()) return {};
  Eigen::MatrixXd A = homogeneous_coeff_matrix(polys);
  // Rows are polynomials; pivot on the transpose so pivots select rows.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.transpose());
  qr.setThreshold(relTol);
  int r = static_cast<int>(qr.rank());
  std::vector<int> picks(r);
  for (int i = 0; i < r; ++i) picks[i] = qr.colsPermutation().indices()(i);
  std::sort(picks.begin(), picks.end());
  std::vector<BaryPoly> out;
  out.reserve(r);
  for (int i : picks) out.push_back(polys[i]);
  return out;
}

std::vector<BaryPoly> homogeneous_monomials(int degree) {
  std::vector<BaryPoly> out;
  for (int a = degree; a >= 0; --a)
    for (int b = degree - a; b >= 0; --b)
      for (int c = degree - a - b; c >= 0; --c) out.push_back(BaryPoly::monomial(a, b, c, degree - a - b - c));
  return out;
}

std::vector<BaryPoly> product_span(const std::vector<BaryPoly>& a, const std::vector<BaryPoly>& b) {
  std::vector<BaryPoly> out;
  out.reserve(a.size() * b.size());
  for (auto& p : a)
    for (auto& q : b) out.push_back(p * q);
  return out;
}

}  // namespace mltet
