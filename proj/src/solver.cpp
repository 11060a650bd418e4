// SPDX-License-Identifier: Apache-2.0
#include "mltet/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace mltet {

namespace {

// Per-element sample point of the piecewise-constant material mode: the
// lexicographically smallest vertex, i.e. a nearest-grid-corner lookup the
// way vertex-registered material models are applied in practice. Element
// centroids are deliberately avoided: centroid values make the first moment
// of the coefficient error vanish elementwise, which hides the order
// reduction this mode exists to expose.
Eigen::Vector3d pwc_sample_point(const TetMesh& mesh, int e) {
  const auto& t = mesh.tets[e];
  int best = t[0];
  auto less = [&](int a, int b) {
    const Eigen::Vector3d& u = mesh.vertices[a];
    const Eigen::Vector3d& v = mesh.vertices[b];
    if (u[0] != v[0]) return u[0] < v[0];
    if (u[1] != v[1]) return u[1] < v[1];
    return u[2] < v[2];
  };
  for (int i = 1; i < 4; ++i)
    if (less(t[i], best)) best = t[i];
  return mesh.vertices[best];
}

Eigen::VectorXd gather_local(const WaveProblem& p, const Eigen::VectorXd& u, int e) {
  const int n = p.tables->n;
  const int nc = p.components();
  Eigen::VectorXd loc(nc * n);
  for (int v = 0; v < nc; ++v)
    for (int a = 0; a < n; ++a) {
      int g = p.dofs.element_dofs[e][a];
      int f = p.dofs.free_index[g];
      loc(v * n + a) = (f >= 0) ? u(v * p.dofs.free_count + f) : 0.0;
    }
  return loc;
}

Eigen::VectorXd element_action(const WaveProblem& p, int e, const Eigen::VectorXd& loc) {
  switch (p.physics) {
    case FieldMode::Scalar:
      if (p.mode == StiffnessMode::Exact) return matvec_exact_scalar(*p.tables, p.ct[e], loc);
      return matvec_quad_scalar(*p.tables, p.csamples[e], loc);
    case FieldMode::Elastic:
      if (p.mode == StiffnessMode::Exact)
        return matvec_exact_elastic_isotropic(*p.tables, p.mesh.geom[e], p.lame[e].first,
                                              p.lame[e].second, loc);
      return matvec_quad_elastic_isotropic(*p.tables, p.mesh.geom[e], p.lambda_q[e], p.mu_q[e], loc);
  }
  throw std::logic_error("unreachable");
}

void build_mass(WaveProblem& p, const SpatialFn& rho) {
  const int n = p.tables->n;
  const int nc = p.components();
  Eigen::VectorXd massGlobal = Eigen::VectorXd::Zero(p.dofs.total);
  for (int e = 0; e < p.mesh.tet_count(); ++e) {
    Eigen::VectorXd rhoNodes(n);
    if (p.sampling == MaterialSampling::PiecewiseConstant) {
      rhoNodes.setConstant(rho(pwc_sample_point(p.mesh, e)));
    } else {
      for (int a = 0; a < n; ++a) rhoNodes(a) = rho(p.mesh.geom[e].map(p.tables->node_points[a]));
    }
    Eigen::VectorXd m = mass_diagonal(*p.tables, p.mesh.geom[e], rhoNodes);
    for (int a = 0; a < n; ++a) massGlobal(p.dofs.element_dofs[e][a]) += m(a);
  }
  p.mass.resize(p.size());
  for (int v = 0; v < nc; ++v)
    for (int f = 0; f < p.dofs.free_count; ++f)
      p.mass(v * p.dofs.free_count + f) = massGlobal(p.dofs.free_to_global[f]);
}

}  // namespace

WaveProblem build_scalar_problem(TetMesh mesh, ElementId element, StiffnessMode mode,
                                 BoundaryKind boundary, MaterialSampling sampling,
                                 const SpatialFn& rho, const SpatialFn& c,
                                 const std::string& ruleLabel) {
  WaveProblem p;
  p.element = element;
  p.mode = mode;
  p.boundary = boundary;
  p.physics = FieldMode::Scalar;
  p.sampling = sampling;
  p.tables = &kernel_tables(element, ruleLabel);
  p.mesh = std::move(mesh);
  p.dofs = enumerate_global_dofs(p.mesh, p.tables->nodes, boundary == BoundaryKind::Dirichlet);

  const int ne = p.mesh.tet_count();
  if (mode == StiffnessMode::Exact) {
    p.ct.reserve(ne);
    for (int e = 0; e < ne; ++e) {
      Eigen::Vector3d x = sampling == MaterialSampling::PiecewiseConstant
                              ? pwc_sample_point(p.mesh, e)
                              : p.mesh.geom[e].map({0.25, 0.25, 0.25, 0.25});
      p.ct.push_back(scalar_reference_tensor(c(x), p.mesh.geom[e]));
    }
  } else {
    p.csamples.reserve(ne);
    for (int e = 0; e < ne; ++e) {
      std::vector<double> cvals(p.tables->nq);
      if (sampling == MaterialSampling::PiecewiseConstant) {
        std::fill(cvals.begin(), cvals.end(), c(pwc_sample_point(p.mesh, e)));
      } else {
        for (int k = 0; k < p.tables->nq; ++k)
          cvals[k] = c(p.mesh.geom[e].map(p.tables->rule_points[k]));
      }
      p.csamples.push_back(transform_scalar(cvals, p.mesh.geom[e], p.tables->rule_weights));
    }
  }
  build_mass(p, rho);
  return p;
}

WaveProblem build_elastic_problem(TetMesh mesh, ElementId element, StiffnessMode mode,
                                  BoundaryKind boundary, MaterialSampling sampling,
                                  const SpatialFn& rho, const SpatialFn& lambda, const SpatialFn& mu,
                                  const std::string& ruleLabel) {
  WaveProblem p;
  p.element = element;
  p.mode = mode;
  p.boundary = boundary;
  p.physics = FieldMode::Elastic;
  p.sampling = sampling;
  p.tables = &kernel_tables(element, ruleLabel);
  p.mesh = std::move(mesh);
  p.dofs = enumerate_global_dofs(p.mesh, p.tables->nodes, boundary == BoundaryKind::Dirichlet);

  const int ne = p.mesh.tet_count();
  if (mode == StiffnessMode::Exact) {
    p.lame.reserve(ne);
    for (int e = 0; e < ne; ++e) {
      Eigen::Vector3d xc = sampling == MaterialSampling::PiecewiseConstant
                               ? pwc_sample_point(p.mesh, e)
                               : p.mesh.geom[e].map({0.25, 0.25, 0.25, 0.25});
      p.lame.emplace_back(lambda(xc), mu(xc));
    }
  } else {
    p.lambda_q.resize(ne);
    p.mu_q.resize(ne);
    for (int e = 0; e < ne; ++e) {
      p.lambda_q[e].resize(p.tables->nq);
      p.mu_q[e].resize(p.tables->nq);
      for (int k = 0; k < p.tables->nq; ++k) {
        Eigen::Vector3d x = sampling == MaterialSampling::PiecewiseConstant
                                ? pwc_sample_point(p.mesh, e)
                                : p.mesh.geom[e].map(p.tables->rule_points[k]);
        p.lambda_q[e][k] = lambda(x);
        p.mu_q[e][k] = mu(x);
      }
    }
  }
  build_mass(p, rho);
  return p;
}

Eigen::VectorXd global_matvec(const WaveProblem& p, const Eigen::VectorXd& u) {
  const int n = p.tables->n;
  const int nc = p.components();
  std::vector<Eigen::VectorXd> local(p.mesh.tet_count());
  for (int e = 0; e < p.mesh.tet_count(); ++e) local[e] = element_action(p, e, gather_local(p, u, e));

  Eigen::VectorXd out = Eigen::VectorXd::Zero(p.size());
  for (int f = 0; f < p.dofs.free_count; ++f) {
    int g = p.dofs.free_to_global[f];
    for (auto& [e, a] : p.dofs.incidence[g])
      for (int v = 0; v < nc; ++v) out(v * p.dofs.free_count + f) += local[e](v * n + a);
  }
  return out;
}

Eigen::VectorXd apply_spatial_operator(const WaveProblem& p, const Eigen::VectorXd& u) {
  return global_matvec(p, u).cwiseQuotient(p.mass);
}

double energy_norm(const WaveProblem& p, const Eigen::VectorXd& u) {
  return std::sqrt(u.dot(p.mass.cwiseProduct(u)));
}

Eigen::VectorXd interpolate_scalar(const WaveProblem& p, const SpatialFn& f) {
  Eigen::VectorXd u(p.dofs.free_count);
  for (int i = 0; i < p.dofs.free_count; ++i) u(i) = f(p.dofs.coords[p.dofs.free_to_global[i]]);
  return u;
}

double estimate_sigma_max(const WaveProblem& p, double tol, int maxIters) {
  const Eigen::VectorXd sqrtM = p.mass.cwiseSqrt();
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(p.size());
  for (int i = 0; i < v.size(); ++i) v(i) = normal(rng);
  v /= v.norm();

  double prev = 0;
  int hits = 0;
  for (int it = 0; it < maxIters; ++it) {
    // w = M^{-1/2} A M^{-1/2} v
    Eigen::VectorXd w = global_matvec(p, v.cwiseQuotient(sqrtM)).cwiseQuotient(sqrtM);
    double lambda = v.dot(w);
    double nw = w.norm();
    if (nw == 0) return 0;
    v = w / nw;
    if (it > 0 && std::abs(lambda - prev) <= tol * std::abs(lambda)) {
      if (++hits >= 3) return lambda;
    } else {
      hits = 0;
    }
    prev = lambda;
  }
  throw NoConvergence("power iteration did not settle within the iteration cap");
}

SimulationState make_initial_state(const WaveProblem& p, const Eigen::VectorXd& u0,
                                   const Eigen::VectorXd& v0, double dt, int K) {
  SimulationState s;
  s.dt = dt;
  s.K = K;
  s.time = 0;
  s.u_curr = u0;
  // u(-dt) by Taylor expansion through order 2K with u'' = -L u.
  s.u_prev = u0;
  Eigen::VectorXd even = u0, odd = v0;
  double factEven = 1, factOdd = 1;
  for (int j = 1; j <= K; ++j) {
    factOdd *= (2 * j - 1);
    odd = (j == 1) ? v0 : Eigen::VectorXd(-apply_spatial_operator(p, odd));
    s.u_prev -= std::pow(dt, 2 * j - 1) / factOdd * odd;
    factEven *= (2 * j - 1) * (2 * j);
    even = -apply_spatial_operator(p, even);
    s.u_prev += std::pow(dt, 2 * j) / factEven * even;
    factOdd *= (2 * j);
  }
  return s;
}

void dablain_step(SimulationState& s, const WaveProblem& p, const SourceFn* source) {
  Eigen::VectorXd y = s.u_curr;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(s.u_curr.size());
  double factorial = 1;
  for (int k = 1; k <= s.K; ++k) {
    y = -apply_spatial_operator(p, y);
    if (source) y += (*source)(s.time, 2 * (k - 1));
    factorial *= (2 * k - 1) * (2 * k);
    acc += (2.0 * std::pow(s.dt, 2 * k) / factorial) * y;
  }
  Eigen::VectorXd next = 2.0 * s.u_curr - s.u_prev + acc;
  s.u_prev = std::move(s.u_curr);
  s.u_curr = std::move(next);
  s.time += s.dt;
}

double AcousticManufactured::omega() const {
  return c0 * std::sqrt(k(0) * k(0) + k(1) * k(1) + k(2) * k(2));
}

double AcousticManufactured::rho(const Eigen::Vector3d& x) const {
  return rho0 * g(0, x[0]) * g(1, x[1]) * g(2, x[2]);
}

double AcousticManufactured::c(const Eigen::Vector3d& x) const {
  double num = 0, den = 0;
  for (int i = 0; i < 3; ++i) {
    double ki = k(i), gi = g(i, x[i]);
    num += ki * ki;
    den += ki * ki * gi * gi;
  }
  return c0 * std::sqrt(num / den);
}

double AcousticManufactured::pressure(const Eigen::Vector3d& x, double t) const {
  double s = std::cos(omega() * t);
  for (int i = 0; i < 3; ++i) s *= std::sin(k(i) * X(i, x[i]));
  return s;
}

ConvergenceRow run_convergence_case(const AcousticManufactured& mp, ElementId element,
                                    StiffnessMode mode, MaterialSampling sampling, int cellsPerAxis,
                                    double distortion, int K) {
  const auto t0 = std::chrono::steady_clock::now();
  TetMesh mesh = build_block_mesh(cellsPerAxis, cellsPerAxis, cellsPerAxis, mp.box_lo(), mp.box_hi(),
                                  distortion);
  auto rhoEq = [&](const Eigen::Vector3d& x) { return mp.rho_eq(x); };
  auto cEq = [&](const Eigen::Vector3d& x) { return mp.c_eq(x); };
  WaveProblem p = build_scalar_problem(std::move(mesh), element, mode, BoundaryKind::Neumann, sampling,
                                       rhoEq, cEq);

  ConvergenceRow row;
  row.cellsPerAxis = cellsPerAxis;
  row.N = p.dofs.free_count;
  row.h = (mp.box_hi() - mp.box_lo()).maxCoeff() / cellsPerAxis;
  row.sigmaMax = estimate_sigma_max(p);

  const double T = mp.final_time();
  double dt = 0.99 * std::sqrt(dablain_cK(K) / row.sigmaMax);
  row.steps = static_cast<int>(std::ceil(T / dt));
  dt = T / row.steps;
  row.dt = dt;

  Eigen::VectorXd u0 = interpolate_scalar(p, [&](const Eigen::Vector3d& x) { return mp.pressure(x, 0.0); });
  SimulationState state = make_initial_state(p, u0, Eigen::VectorXd::Zero(p.size()), dt, K);
  for (int s = 0; s < row.steps; ++s) dablain_step(state, p);

  Eigen::VectorXd exact =
      interpolate_scalar(p, [&](const Eigen::Vector3d& x) { return mp.pressure(x, T); });
  row.rms = std::sqrt((state.u_curr - exact).squaredNorm() / p.dofs.free_count);
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

std::vector<ConvergenceRow> run_convergence_study(const AcousticManufactured& mp, ElementId element,
                                                  StiffnessMode mode, MaterialSampling sampling,
                                                  const std::vector<int>& sizes, double distortion,
                                                  int K) {
  std::vector<ConvergenceRow> rows;
  for (int n : sizes) rows.push_back(run_convergence_case(mp, element, mode, sampling, n, distortion, K));
  return rows;
}

void write_snapshot(const std::string& path, const Eigen::VectorXd& u) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path);
  char header[16] = {'M', 'L', 'T', 'S', 'N', 'A', 'P', '1'};
  std::uint64_t count = static_cast<std::uint64_t>(u.size());
  std::memcpy(header + 8, &count, 8);
  out.write(header, 16);
  out.write(reinterpret_cast<const char*>(u.data()), 8 * u.size());
}

Eigen::VectorXd read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open: " + path);
  char header[16];
  in.read(header, 16);
  if (!in || std::memcmp(header, "MLTSNAP1", 8) != 0) throw ParseError(path + ": bad snapshot header");
  std::uint64_t count = 0;
  std::memcpy(&count, header + 8, 8);
  Eigen::VectorXd u(static_cast<int>(count));
  in.read(reinterpret_cast<char*>(u.data()), 8 * static_cast<std::streamsize>(count));
  if (!in) throw ParseError(path + ": truncated snapshot");
  return u;
}

}  // namespace mltet
