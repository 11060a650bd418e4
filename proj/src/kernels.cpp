// SPDX-License-Identifier: Apache-2.0
#include "mltet/kernels.hpp"

#include <cmath>

namespace mltet {

namespace {
KernelOpCounters g_counters;
}

KernelOpCounters& kernel_op_counters() { return g_counters; }
void reset_kernel_op_counters() { g_counters = {}; }

ElementGeometry ElementGeometry::from_jacobian(const Eigen::Matrix3d& J, const Eigen::Vector3d& origin) {
  ElementGeometry g;
  g.J = J;
  g.origin = origin;
  g.detJ = J.determinant();
  if (!(g.detJ > 0)) throw InvertedElement("element Jacobian determinant " + std::to_string(g.detJ));
  g.Jinv = J.inverse();
  return g;
}

Eigen::Vector3d ElementGeometry::map(const Bary& ref) const {
  return origin + J * Eigen::Vector3d(ref[0], ref[1], ref[2]);
}

Eigen::Matrix3d scalar_reference_tensor(double c, const ElementGeometry& geom) {
  return c * geom.detJ * (geom.Jinv * geom.Jinv.transpose());
}

std::vector<Eigen::Matrix3d> transform_scalar(const std::vector<double>& cAtPoints,
                                              const ElementGeometry& geom,
                                              const Eigen::VectorXd& ruleWeights) {
  const Eigen::Matrix3d H = geom.detJ * (geom.Jinv * geom.Jinv.transpose());
  std::vector<Eigen::Matrix3d> out(cAtPoints.size());
  for (size_t k = 0; k < cAtPoints.size(); ++k) out[k] = ruleWeights(static_cast<int>(k)) * cAtPoints[k] * H;
  return out;
}

ElasticTensor ElasticTensor::isotropic(double lambda, double mu) {
  ElasticTensor C;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
          C.at(i, j, k, l) = lambda * (i == j) * (k == l) + mu * ((i == k) * (j == l) + (i == l) * (j == k));
  return C;
}

ElasticTensor transform_elastic(const ElasticTensor& physical, const ElementGeometry& geom) {
  // C~_{i j k l} = detJ * sum_{p,q} Jinv(i,p) C_{p j k q} Jinv(l,q)
  ElasticTensor out;
  const auto& R = geom.Jinv;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          double s = 0;
          for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q) s += R(i, p) * physical.at(p, j, k, q) * R(l, q);
          out.at(i, j, k, l) = geom.detJ * s;
        }
  return out;
}

Eigen::VectorXd matvec_exact_scalar(const KernelTables& t, const Eigen::Matrix3d& ct,
                                    const Eigen::VectorXd& u) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(t.n);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j <= i; ++j) {
      v.noalias() += ct(i, j) * (t.Bhat[i][j] * u);
      ++g_counters.b_products;
    }
  return v;
}

Eigen::VectorXd matvec_quad_scalar(const KernelTables& t, const std::vector<Eigen::Matrix3d>& samples,
                                   const Eigen::VectorXd& u) {
  std::array<Eigen::VectorXd, 3> eps;
  for (int j = 0; j < 3; ++j) {
    eps[j].noalias() = t.D[j] * u;
    ++g_counters.d_products;
  }
  std::array<Eigen::VectorXd, 3> sigma;
  for (int i = 0; i < 3; ++i) sigma[i].setZero(t.nq);
  for (int k = 0; k < t.nq; ++k)
    for (int i = 0; i < 3; ++i) {
      double s = 0;
      for (int j = 0; j < 3; ++j) s += samples[k](i, j) * eps[j](k);
      sigma[i](k) = s;
    }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(t.n);
  for (int i = 0; i < 3; ++i) {
    v.noalias() += t.D[i].transpose() * sigma[i];
    ++g_counters.d_products;
  }
  return v;
}

Eigen::VectorXd matvec_exact_elastic(const KernelTables& t, const ElasticTensor& ct,
                                     const Eigen::VectorXd& u) {
  const int n = t.n;
  // A1*: eps[iD][jD][jV] = B[iD][jD] u^{jV}
  std::array<std::array<std::array<Eigen::VectorXd, 3>, 3>, 3> eps;
  for (int iD = 0; iD < 3; ++iD)
    for (int jD = 0; jD < 3; ++jD)
      for (int jV = 0; jV < 3; ++jV) {
        eps[iD][jD][jV].noalias() = t.B[iD][jD] * u.segment(jV * n, n);
        ++g_counters.b_products;
      }
  // A2*
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3 * n);
  for (int iV = 0; iV < 3; ++iV)
    for (int iD = 0; iD < 3; ++iD)
      for (int jD = 0; jD < 3; ++jD)
        for (int jV = 0; jV < 3; ++jV) {
          double c = ct.at(iD, iV, jV, jD);
          if (c != 0.0) v.segment(iV * n, n).noalias() += c * eps[iD][jD][jV];
        }
  return v;
}

Eigen::VectorXd matvec_exact_elastic_isotropic(const KernelTables& t, const ElementGeometry& geom,
                                               double lambda, double mu, const Eigen::VectorXd& u) {
  const int n = t.n;
  const Eigen::Matrix3d& R = geom.Jinv;
  const Eigen::Matrix3d H = R * R.transpose();
  std::array<std::array<std::array<Eigen::VectorXd, 3>, 3>, 3> eps;
  for (int iD = 0; iD < 3; ++iD)
    for (int jD = 0; jD < 3; ++jD)
      for (int jV = 0; jV < 3; ++jV) {
        eps[iD][jD][jV].noalias() = t.B[iD][jD] * u.segment(jV * n, n);
        ++g_counters.b_products;
      }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3 * n);
  // Per node and iD slice E(jD,jV), contract with
  //   detJ (lambda <R,E> R + mu R E^t R + mu H E).
  for (int a = 0; a < n; ++a) {
    for (int iD = 0; iD < 3; ++iD) {
      Eigen::Matrix3d E;
      for (int jD = 0; jD < 3; ++jD)
        for (int jV = 0; jV < 3; ++jV) E(jD, jV) = eps[iD][jD][jV](a);
      Eigen::Matrix3d S = geom.detJ * (lambda * (R.cwiseProduct(E)).sum() * R +
                                       mu * (R * E.transpose() * R) + mu * (H * E));
      for (int iV = 0; iV < 3; ++iV) v(iV * n + a) += S(iD, iV);
    }
  }
  return v;
}

Eigen::VectorXd matvec_quad_elastic(const KernelTables& t, const std::vector<ElasticTensor>& samples,
                                    const Eigen::VectorXd& u) {
  const int n = t.n, nq = t.nq;
  // B1*
  std::array<std::array<Eigen::VectorXd, 3>, 3> eps;
  for (int jD = 0; jD < 3; ++jD)
    for (int jV = 0; jV < 3; ++jV) {
      eps[jD][jV].noalias() = t.D[jD] * u.segment(jV * n, n);
      ++g_counters.d_products;
    }
  // B2*
  std::array<std::array<Eigen::VectorXd, 3>, 3> sigma;
  for (int iD = 0; iD < 3; ++iD)
    for (int iV = 0; iV < 3; ++iV) sigma[iD][iV].setZero(nq);
  for (int k = 0; k < nq; ++k) {
    const ElasticTensor& C = samples[k];
    for (int iD = 0; iD < 3; ++iD)
      for (int iV = 0; iV < 3; ++iV) {
        double s = 0;
        for (int jD = 0; jD < 3; ++jD)
          for (int jV = 0; jV < 3; ++jV) s += C.at(iD, iV, jV, jD) * eps[jD][jV](k);
        sigma[iD][iV](k) = s;
      }
  }
  // B3*
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3 * n);
  for (int iV = 0; iV < 3; ++iV)
    for (int iD = 0; iD < 3; ++iD) {
      v.segment(iV * n, n).noalias() += t.D[iD].transpose() * sigma[iD][iV];
      ++g_counters.d_products;
    }
  return v;
}

namespace {

// Voigt order (0,0),(1,1),(2,2),(1,2),(0,2),(0,1).
constexpr int kVoigtI[6] = {0, 1, 2, 1, 0, 0};
constexpr int kVoigtJ[6] = {0, 1, 2, 2, 2, 1};

Eigen::Matrix<double, 6, 6> voigt_matrix(const ElasticTensor& C) {
  Eigen::Matrix<double, 6, 6> V;
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) V(a, b) = C.at(kVoigtI[a], kVoigtJ[a], kVoigtI[b], kVoigtJ[b]);
  return V;
}

}  // namespace

Eigen::VectorXd matvec_quad_elastic_voigt(const KernelTables& t, const ElementGeometry& geom,
                                          const std::vector<ElasticTensor>& physicalAtPoints,
                                          const Eigen::VectorXd& u) {
  const int n = t.n, nq = t.nq;
  const Eigen::Matrix3d& R = geom.Jinv;
  std::array<std::array<Eigen::VectorXd, 3>, 3> eps;
  for (int jD = 0; jD < 3; ++jD)
    for (int jV = 0; jV < 3; ++jV) {
      eps[jD][jV].noalias() = t.D[jD] * u.segment(jV * n, n);
      ++g_counters.d_products;
    }
  std::array<std::array<Eigen::VectorXd, 3>, 3> sigma;
  for (int iD = 0; iD < 3; ++iD)
    for (int iV = 0; iV < 3; ++iV) sigma[iD][iV].setZero(nq);
  for (int k = 0; k < nq; ++k) {
    // Physical gradient G(p, jV) = sum_jD R(jD, p) eps[jD][jV].
    Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
    for (int p = 0; p < 3; ++p)
      for (int jV = 0; jV < 3; ++jV)
        for (int jD = 0; jD < 3; ++jD) G(p, jV) += R(jD, p) * eps[jD][jV](k);
    // Physical stress through the symmetric strain in Voigt form; the minor
    // symmetry of C makes the skew part of G irrelevant.
    Eigen::Matrix<double, 6, 6> V = voigt_matrix(physicalAtPoints[k]);
    Eigen::Matrix<double, 6, 1> strain;
    for (int a = 0; a < 6; ++a) {
      int i = kVoigtI[a], j = kVoigtJ[a];
      strain(a) = (a < 3) ? G(i, j) : (G(i, j) + G(j, i));
    }
    Eigen::Matrix<double, 6, 1> stressV = V * strain;
    Eigen::Matrix3d S;
    S << stressV(0), stressV(5), stressV(4), stressV(5), stressV(1), stressV(3), stressV(4),
        stressV(3), stressV(2);
    const double scale = t.rule_weights(k) * geom.detJ;
    for (int iD = 0; iD < 3; ++iD)
      for (int iV = 0; iV < 3; ++iV) {
        double s = 0;
        for (int p = 0; p < 3; ++p) s += R(iD, p) * S(p, iV);
        sigma[iD][iV](k) = scale * s;
      }
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3 * n);
  for (int iV = 0; iV < 3; ++iV)
    for (int iD = 0; iD < 3; ++iD) {
      v.segment(iV * n, n).noalias() += t.D[iD].transpose() * sigma[iD][iV];
      ++g_counters.d_products;
    }
  return v;
}

Eigen::VectorXd matvec_quad_elastic_isotropic(const KernelTables& t, const ElementGeometry& geom,
                                              const std::vector<double>& lambdaAtPoints,
                                              const std::vector<double>& muAtPoints,
                                              const Eigen::VectorXd& u) {
  const int n = t.n, nq = t.nq;
  const Eigen::Matrix3d& R = geom.Jinv;
  const Eigen::Matrix3d H = R * R.transpose();
  std::array<std::array<Eigen::VectorXd, 3>, 3> eps;
  for (int jD = 0; jD < 3; ++jD)
    for (int jV = 0; jV < 3; ++jV) {
      eps[jD][jV].noalias() = t.D[jD] * u.segment(jV * n, n);
      ++g_counters.d_products;
    }
  std::array<std::array<Eigen::VectorXd, 3>, 3> sigma;
  for (int iD = 0; iD < 3; ++iD)
    for (int iV = 0; iV < 3; ++iV) sigma[iD][iV].setZero(nq);
  for (int k = 0; k < nq; ++k) {
    Eigen::Matrix3d E;
    for (int jD = 0; jD < 3; ++jD)
      for (int jV = 0; jV < 3; ++jV) E(jD, jV) = eps[jD][jV](k);
    const double scale = t.rule_weights(k) * geom.detJ;
    Eigen::Matrix3d S = scale * (lambdaAtPoints[k] * (R.cwiseProduct(E)).sum() * R +
                                 muAtPoints[k] * (R * E.transpose() * R) + muAtPoints[k] * (H * E));
    for (int iD = 0; iD < 3; ++iD)
      for (int iV = 0; iV < 3; ++iV) sigma[iD][iV](k) = S(iD, iV);
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3 * n);
  for (int iV = 0; iV < 3; ++iV)
    for (int iD = 0; iD < 3; ++iD) {
      v.segment(iV * n, n).noalias() += t.D[iD].transpose() * sigma[iD][iV];
      ++g_counters.d_products;
    }
  return v;
}

Eigen::VectorXd mass_diagonal(const KernelTables& t, const ElementGeometry& geom,
                              const Eigen::VectorXd& rhoAtNodes) {
  Eigen::VectorXd m(t.n);
  for (int i = 0; i < t.n; ++i) {
    if (!(rhoAtNodes(i) > 0)) throw NonpositiveDensity("density must be positive at mass nodes");
    m(i) = geom.detJ * t.mass_weights(i) * rhoAtNodes(i);
  }
  return m;
}

Eigen::MatrixXd element_matrix_exact_scalar(const KernelTables& t, const Eigen::Matrix3d& ct) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(t.n, t.n);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) A.noalias() += ct(i, j) * t.B[i][j];
  return A;
}

Eigen::MatrixXd element_matrix_quad_scalar(const KernelTables& t,
                                           const std::vector<Eigen::Matrix3d>& samples) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(t.n, t.n);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd diag(t.nq);
      for (int k = 0; k < t.nq; ++k) diag(k) = samples[k](i, j);
      A.noalias() += t.D[i].transpose() * diag.asDiagonal() * t.D[j];
    }
  return A;
}

}  // namespace mltet
