// SPDX-License-Identifier: Apache-2.0
#include "mltet/dispersion.hpp"

#include <cmath>

namespace mltet {

BlochOperator assemble_bloch_operator(const PeriodicCell& cell, const KernelTables& tables,
                                      StiffnessMode mode) {
  BlochOperator op;
  op.T = cell.T;
  op.n0 = cell.n0;
  op.M = Eigen::VectorXd::Zero(cell.n0);

  const int n = tables.n;
  for (int e = 0; e < cell.mesh.tet_count(); ++e) {
    const ElementGeometry& geom = cell.mesh.geom[e];
    Eigen::VectorXd m = mass_diagonal(tables, geom, Eigen::VectorXd::Ones(n));
    for (int a = 0; a < n; ++a) op.M(cell.owned[e][a]) += m(a);

    Eigen::MatrixXd A;
    if (mode == StiffnessMode::Exact) {
      A = element_matrix_exact_scalar(tables, scalar_reference_tensor(1.0, geom));
    } else {
      auto samples = transform_scalar(std::vector<double>(tables.nq, 1.0), geom, tables.rule_weights);
      A = element_matrix_quad_scalar(tables, samples);
    }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        std::array<int, 3> rel{cell.shift[e][b][0] - cell.shift[e][a][0],
                               cell.shift[e][b][1] - cell.shift[e][a][1],
                               cell.shift[e][b][2] - cell.shift[e][a][2]};
        auto it = op.blocks.find(rel);
        if (it == op.blocks.end())
          it = op.blocks.emplace(rel, Eigen::MatrixXd::Zero(cell.n0, cell.n0)).first;
        it->second(cell.owned[e][a], cell.owned[e][b]) += A(a, b);
      }
  }
  return op;
}

Eigen::MatrixXcd bloch_matrix(const BlochOperator& op, const Eigen::Vector3d& kappa) {
  using namespace std::complex_literals;
  Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(op.n0, op.n0);
  for (auto& [k, A] : op.blocks) {
    Eigen::Vector3d shift = op.T * Eigen::Vector3d(k[0], k[1], k[2]);
    std::complex<double> phase = std::exp(1i * kappa.dot(shift));
    S += phase * A;
  }
  Eigen::VectorXd invSqrtM = op.M.cwiseSqrt().cwiseInverse();
  S = invSqrtM.asDiagonal() * S * invSqrtM.asDiagonal();
  S = (S + S.adjoint().eval()) / 2.0;  // scrub roundoff asymmetry
  return S;
}

std::vector<double> hermitian_eigenvalues(const Eigen::MatrixXcd& H) {
  double dev = (H - H.adjoint()).cwiseAbs().maxCoeff();
  double scale = H.cwiseAbs().maxCoeff();
  if (dev > 1e-10 * std::max(scale, 1e-300))
    throw NotHermitian("Hermitian deviation " + std::to_string(dev));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(H, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  return std::vector<double>(ev.data(), ev.data() + ev.size());
}

double dablain_cK(int K) {
  switch (K) {
    case 1: return 4.0;
    case 2: return 12.0;
    case 3: return 7.57;
    case 4: return 21.48;
  }
  throw std::invalid_argument("Dablain order parameter K must be 1..4");
}

NumericalOmega numerical_omega(double s, double dt, int K) {
  if (K < 1 || K > 4) throw std::invalid_argument("K must be 1..4");
  const double y = dt * dt * s;
  double arg = 0, term = 1, factorial = 1;
  for (int k = 0; k <= K; ++k) {
    if (k > 0) {
      term *= -y;
      factorial *= (2 * k - 1) * (2 * k);
    }
    arg += term / factorial;
  }
  NumericalOmega out;
  if (arg < -1.0 || arg > 1.0) return out;  // unstable
  out.stable = true;
  out.omega = std::acos(arg) / dt;
  return out;
}

std::vector<Eigen::Vector3d> fibonacci_sphere_directions(int n) {
  std::vector<Eigen::Vector3d> dirs;
  dirs.reserve(n);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double z = 1.0 - 2.0 * (i + 0.5) / n;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden * i;
    dirs.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return dirs;
}

double dispersion_error(const BlochOperator& op, double lambda, int K, double dt, int nDirections) {
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be positive");
  const double kmag = 2.0 * M_PI / lambda;
  const double omegaExact = kmag;  // c_P = 1
  double worst = 0;
  for (auto& dir : fibonacci_sphere_directions(nDirections)) {
    Eigen::Vector3d kappa = kmag * dir;
    auto evs = hermitian_eigenvalues(bloch_matrix(op, kappa));
    double best = std::numeric_limits<double>::infinity();
    double bestAny = std::numeric_limits<double>::infinity();
    for (double s : evs) {
      if (s < 0) s = 0;
      double omegaH;
      if (dt > 0) {
        auto w = numerical_omega(s, dt, K);
        if (!w.stable) continue;
        omegaH = w.omega;
      } else {
        omegaH = std::sqrt(s);
      }
      double err = std::abs(1.0 - omegaH / omegaExact);
      bestAny = std::min(bestAny, err);
      // Branch matching: only eigenvalues within a factor 3 of the target
      // frequency compete, which keeps flat high branches out at coarse
      // resolution.
      if (omegaH > omegaExact / 3.0 && omegaH < 3.0 * omegaExact) best = std::min(best, err);
    }
    if (!std::isfinite(best)) best = bestAny;
    worst = std::max(worst, best);
  }
  return worst;
}

double max_spatial_eigenvalue(const BlochOperator& op, int gridPerAxis, int refineRounds,
                              Eigen::Vector3d* argmaxKappa) {
  if (gridPerAxis < 8) throw std::invalid_argument("grid resolution must be >= 8 per axis");
  const Eigen::Matrix3d TinvT = op.T.inverse().transpose();

  auto top = [&](const Eigen::Vector3d& y) {
    auto evs = hermitian_eigenvalues(bloch_matrix(op, TinvT * y));
    return evs.back();
  };

  double best = -std::numeric_limits<double>::infinity();
  Eigen::Vector3d bestY = Eigen::Vector3d::Zero();
  const double h0 = 2.0 * M_PI / gridPerAxis;
  for (int i = 0; i < gridPerAxis; ++i)
    for (int j = 0; j < gridPerAxis; ++j)
      for (int k = 0; k < gridPerAxis; ++k) {
        Eigen::Vector3d y(i * h0, j * h0, k * h0);
        double s = top(y);
        if (s > best) {
          best = s;
          bestY = y;
        }
      }

  double h = h0;
  for (int round = 0; round < refineRounds; ++round) {
    h /= 2;
    Eigen::Vector3d center = bestY;
    for (int i = -2; i <= 2; ++i)
      for (int j = -2; j <= 2; ++j)
        for (int k = -2; k <= 2; ++k) {
          Eigen::Vector3d y = center + h * Eigen::Vector3d(i, j, k) / 2.0;
          double s = top(y);
          if (s > best) {
            best = s;
            bestY = y;
          }
        }
  }
  if (argmaxKappa) *argmaxKappa = TinvT * bestY;
  return best;
}

double elements_per_wavelength(double lambda) {
  return lambda / std::cbrt(honeycomb_average_element_volume());
}

PowerFit fit_power_law(const std::vector<std::pair<double, double>>& pointsNE) {
  std::vector<std::pair<double, double>> usable;
  for (auto& [N, e] : pointsNE)
    if (N > 0 && e > 0 && e < 1e-1) usable.emplace_back(std::log(N), std::log(e));
  if (usable.size() < 2) throw DegenerateFit("need at least two resolved points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto& [x, y] : usable) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(usable.size());
  const double denom = m * sxx - sx * sx;
  if (std::abs(denom) < 1e-12) throw DegenerateFit("abscissa values do not vary");
  double slope = (m * sxy - sx * sy) / denom;
  double intercept = (sy - slope * sx) / m;
  return {std::exp(intercept), -slope};
}

}  // namespace mltet
