// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// required criterion fails. Criteria needing degree-3/4 mass node data are
// skipped (not failed) when the data files are absent.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <random>
#include <vector>

#include "mltet/dispersion.hpp"
#include "mltet/kernels.hpp"
#include "mltet/mesh.hpp"
#include "mltet/quadrature.hpp"
#include "mltet/refelement.hpp"
#include "mltet/solver.hpp"

using namespace mltet;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
              detail.c_str());
  if (!pass) ++g_failures;
}

void report_skip(int criterion, const std::string& name, const std::string& why) {
  std::printf("SKIP criterion %d: %s — %s\n", criterion, name.c_str(), why.c_str());
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

const ElementId kAll[] = {ElementId::P2N15, ElementId::P3N32, ElementId::P4N60, ElementId::P4N61,
                          ElementId::P4N65};

// ---- criterion 1: rule regression -----------------------------------------

void criterion1() {
  const int expectCount[] = {14, 21, 51, 60, 60};
  bool pass = true;
  std::string detail;
  char buf[160];
  for (int i = 0; i < 5; ++i) {
    ElementId id = kAll[i];
    auto rule = builtin_stiffness_rule(id);
    auto gens = builtin_generator_set(id);
    double defect = exactness_defect(rule, gens);
    bool ok = defect < 1e-13 && check_positivity(rule) && rule.point_count() == expectCount[i];
    auto space = element_space(id);
    auto scalar = check_spurious_free(space.basis, rule, FieldMode::Scalar);
    auto elastic = check_spurious_free(space.basis, rule, FieldMode::Elastic);
    ok = ok && scalar.pass && scalar.nullspace_dim == 1 && elastic.pass && elastic.nullspace_dim == 6;
    std::snprintf(buf, sizeof buf, "%s defect=%.1e null=(%d,%d) ", element_name(id), defect,
                  scalar.nullspace_dim, elastic.nullspace_dim);
    detail += buf;
    pass = pass && ok;
  }
  report(1, "rule regression (counts, C6, C7, exactness)", pass, detail);
}

// ---- criterion 2: C8 containment -------------------------------------------

void criterion2() {
  bool pass = true;
  std::string detail;
  for (ElementId id : kAll) {
    auto space = element_space(id);
    auto target = product_span(homogeneous_monomials(element_degree(id) - 1), derivative_space(space));
    std::vector<BaryPoly> v;
    for (auto& g : builtin_generator_set(id).generators)
      for (auto& img : expand_generator(g)) v.push_back(img);
    bool ok = span_contains(v, target, 1e-9);
    detail += std::string(element_name(id)) + (ok ? " ok " : " FAIL ");
    pass = pass && ok;
  }
  report(2, "exactness-space containment P_{p-1} x DU in V", pass, detail);
}

// ---- criterion 3: finder reproduction ---------------------------------------

void criterion3() {
  Timer timer;

  // The paper's step 4 screens candidate solutions with C6 and C7; a
  // configuration can hold several admissible rules, so the published rule
  // must appear among the distinct solutions of the seeded trial budget.
  auto closest = [&](ElementId id, const Configuration& config, int* nfound) {
    auto space = element_space(id);
    FindOptions opts;
    opts.max_trials = 1000;
    opts.seed = 20240917;
    auto basis = space.basis;
    opts.admissibility = [&basis](const QuadratureRule& r) {
      return check_spurious_free(basis, r, FieldMode::Scalar).pass &&
             check_spurious_free(basis, r, FieldMode::Elastic).pass;
    };
    auto rules = find_rules_all(config, builtin_generator_set(id), opts);
    *nfound = static_cast<int>(rules.size());
    double best = std::numeric_limits<double>::infinity();
    for (auto& r : rules) best = std::min(best, rule_distance(r, builtin_stiffness_rule(id)));
    return best;
  };

  Configuration c14;
  c14.k31 = 2;
  c14.k22 = 1;
  int n14 = 0;
  double d14 = closest(ElementId::P2N15, c14, &n14);

  Configuration c21;
  c21.k4 = 1;
  c21.k31 = 2;
  c21.k211 = 1;
  int n21 = 0;
  double d21 = closest(ElementId::P3N32, c21, &n21);

  char buf[200];
  std::snprintf(buf, sizeof buf,
                "14pt dist=%.2e (%d admissible); 21pt dist=%.2e (%d admissible); %.0fs", d14, n14,
                d21, n21, timer.seconds());
  report(3, "finder rediscovers the 14- and 21-point rules", d14 < 1e-10 && d21 < 1e-10, buf);
}

// ---- criterion 4: kernel equivalence ---------------------------------------

Eigen::Matrix3d random_jacobian(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  while (true) {
    Eigen::Matrix3d J;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) J(i, j) = unit(rng);
    double d = J.determinant();
    if (std::abs(d) < 0.05) continue;
    if (d < 0) J.col(0).swap(J.col(1));
    return J;
  }
}

bool kernel_equivalence_for(ElementId id, std::string& detail) {
  const auto& t = kernel_tables(id);
  const int p = element_degree(id);
  std::mt19937_64 rng(99 + static_cast<int>(id));
  double worst = 0, worstElastic = 0, worstRigid = 0;
  for (int rep = 0; rep < 50; ++rep) {
    auto geom = ElementGeometry::from_jacobian(random_jacobian(rng));
    double c = 0.5 + 0.03 * rep;
    auto ct = scalar_reference_tensor(c, geom);
    auto samples = transform_scalar(std::vector<double>(t.nq, c), geom, t.rule_weights);

    double bmax = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) bmax = std::max(bmax, t.B[i][j].cwiseAbs().maxCoeff());

    for (int a = 0; a <= p; ++a)
      for (int b = 0; a + b <= p; ++b)
        for (int d = 0; a + b + d <= p; ++d) {
          Eigen::VectorXd u(t.n);
          for (int i = 0; i < t.n; ++i) {
            Eigen::Vector3d x = geom.map(t.node_points[i]);
            u(i) = std::pow(x[0], a) * std::pow(x[1], b) * std::pow(x[2], d);
          }
          double scale = ct.cwiseAbs().maxCoeff() * bmax * u.cwiseAbs().maxCoeff() * t.n + 1e-30;
          Eigen::VectorXd diff = matvec_exact_scalar(t, ct, u) - matvec_quad_scalar(t, samples, u);
          worst = std::max(worst, diff.cwiseAbs().maxCoeff() / scale);
        }

    // elastic: vector interpolants and rigid motions
    ElasticTensor C = ElasticTensor::isotropic(1.0 + 0.02 * rep, 0.6);
    ElasticTensor Ct = transform_elastic(C, geom);
    std::vector<ElasticTensor> esamples(t.nq);
    for (int k = 0; k < t.nq; ++k) {
      esamples[k] = Ct;
      for (auto& cc : esamples[k].c) cc *= t.rule_weights(k);
    }
    Eigen::VectorXd u3(3 * t.n);
    for (int v = 0; v < 3; ++v)
      for (int i = 0; i < t.n; ++i) {
        Eigen::Vector3d x = geom.map(t.node_points[i]);
        int a = std::min(v + 1, p - 1);  // total degree stays <= p
        u3(v * t.n + i) = std::pow(x[0], a) * x[2];
      }
    double scaleE = 30 * bmax * u3.cwiseAbs().maxCoeff() * t.n + 1e-30;
    Eigen::VectorXd diffE = matvec_exact_elastic(t, Ct, u3) - matvec_quad_elastic(t, esamples, u3);
    worstElastic = std::max(worstElastic, diffE.cwiseAbs().maxCoeff() / scaleE);

    for (int axis = 0; axis < 3; ++axis) {
      Eigen::VectorXd rot = Eigen::VectorXd::Zero(3 * t.n);
      Eigen::VectorXd trans = Eigen::VectorXd::Zero(3 * t.n);
      trans.segment(axis * t.n, t.n).setOnes();
      for (int i = 0; i < t.n; ++i) {
        Eigen::Vector3d x = geom.map(t.node_points[i]);
        Eigen::Vector3d w = Eigen::Vector3d::Unit(axis).cross(x);
        for (int v = 0; v < 3; ++v) rot(v * t.n + i) = w[v];
      }
      for (const Eigen::VectorXd& rm : {rot, trans}) {
        double scaleR = 30 * bmax * rm.cwiseAbs().maxCoeff() * t.n + 1e-30;
        worstRigid = std::max(worstRigid,
                              matvec_exact_elastic(t, Ct, rm).cwiseAbs().maxCoeff() / scaleR);
        worstRigid = std::max(worstRigid,
                              matvec_quad_elastic(t, esamples, rm).cwiseAbs().maxCoeff() / scaleR);
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s rel. defects: scalar=%.1e elastic=%.1e rigid=%.1e; ",
                element_name(id), worst, worstElastic, worstRigid);
  detail += buf;
  return worst < 1e-12 && worstElastic < 1e-12 && worstRigid < 1e-12;
}

void criterion4() {
  std::string detail;
  bool pass = kernel_equivalence_for(ElementId::P2N15, detail);
  for (ElementId id : {ElementId::P3N32, ElementId::P4N60, ElementId::P4N61, ElementId::P4N65}) {
    if (mass_data_available(id))
      pass = pass && kernel_equivalence_for(id, detail);
    else
      detail += std::string(element_name(id)) + " (no data, skipped); ";
  }
  report(4, "kernel equivalence on 50 random affine elements", pass, detail);
}

// ---- criterion 5: degree-2 dispersion ---------------------------------------

void criterion5() {
  Timer timer;
  const auto& tq = kernel_tables(ElementId::P2N15);
  auto cell = build_honeycomb_cell(tq.nodes);
  auto opExact = assemble_bloch_operator(cell, tq, StiffnessMode::Exact);
  auto opRule = assemble_bloch_operator(cell, tq, StiffnessMode::Rule);
  const auto& tm = kernel_tables(ElementId::P2N15, "q15");
  auto opMass = assemble_bloch_operator(cell, tm, StiffnessMode::Rule);

  // Dyadic sweep in the resolved regime; 256 directions keep the directional
  // sup stable under doubling (checked in the dispersion unit tests).
  auto sweep = [&](const BlochOperator& op) {
    std::vector<std::pair<double, double>> pts;
    for (double lambda : {6.0, 8.485281374238570, 12.0, 16.970562748477140, 24.0})
      pts.emplace_back(elements_per_wavelength(lambda), dispersion_error(op, lambda, 2, 0.0, 256));
    return fit_power_law(pts);
  };

  PowerFit fitExact = sweep(opExact);
  PowerFit fitRule = sweep(opRule);

  double dtExact = std::sqrt(12.0 / max_spatial_eigenvalue(opExact, 16, 2));
  double dtRule = std::sqrt(12.0 / max_spatial_eigenvalue(opRule, 16, 2));
  double dtMass = std::sqrt(12.0 / max_spatial_eigenvalue(opMass, 16, 2));

  bool pass = std::abs(fitExact.exponent - 4.0) < 0.15 && std::abs(fitRule.exponent - 4.0) < 0.15 &&
              std::abs(fitExact.coeff - 1.89) < 0.15 * 1.89 &&
              std::abs(fitRule.coeff - 1.86) < 0.15 * 1.86 && std::abs(dtRule - 0.280) < 0.005 &&
              std::abs(dtExact - 0.291) < 0.005 && std::abs(dtMass - 0.181) < 0.005;
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "exact %.3f NE^-%.3f, q14 %.3f NE^-%.3f; dt: exact %.4f q14 %.4f q15 %.4f; %.0fs",
                fitExact.coeff, fitExact.exponent, fitRule.coeff, fitRule.exponent, dtExact, dtRule,
                dtMass, timer.seconds());
  report(5, "degree-2 dispersion fits and time-step limits", pass, buf);
}

// ---- criterion 6: degree-2 convergence --------------------------------------

double fitted_order(const std::vector<ConvergenceRow>& rows) {
  std::vector<std::pair<double, double>> pts;
  for (auto& r : rows) pts.emplace_back(static_cast<double>(r.N), r.rms);
  return 3.0 * fit_power_law(pts).exponent;
}

void criterion6() {
  Timer timer;
  AcousticManufactured mp;
  auto quadRows = run_convergence_study(mp, ElementId::P2N15, StiffnessMode::Rule,
                                        MaterialSampling::QuadraturePoints, {4, 8, 16}, 0.15, 2);
  auto exactRows = run_convergence_study(mp, ElementId::P2N15, StiffnessMode::Exact,
                                         MaterialSampling::PiecewiseConstant, {4, 8, 16}, 0.15, 2);
  double orderQuad = fitted_order(quadRows);
  double orderExact = fitted_order(exactRows);
  bool pass = orderQuad >= 2.9 && orderExact <= 2.7;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "quadrature order %.2f (>= 2.9), exact+pwconst order %.2f (<= 2.7); rms %.2e..%.2e; %.0fs",
                orderQuad, orderExact, quadRows.front().rms, quadRows.back().rms, timer.seconds());
  report(6, "degree-2 acoustic convergence orders", pass, buf);
}

// ---- criterion 7: degree-3 (conditional on element data) --------------------

void criterion7() {
  if (!mass_data_available(ElementId::P3N32)) {
    report_skip(7, "degree-3 dispersion and convergence", "no p3n32 mass node data file found");
    return;
  }
  Timer timer;
  const auto& t3 = kernel_tables(ElementId::P3N32);
  auto cell = build_honeycomb_cell(t3.nodes);
  auto op = assemble_bloch_operator(cell, t3, StiffnessMode::Rule);

  double dt3 = std::sqrt(dablain_cK(3) / max_spatial_eigenvalue(op, 16, 2));

  std::vector<std::pair<double, double>> pts;
  for (double lambda : {3.0, 4.242640687119285, 6.0, 8.485281374238570})
    pts.emplace_back(elements_per_wavelength(lambda), dispersion_error(op, lambda, 3, 0.0, 256));
  PowerFit fit = fit_power_law(pts);

  AcousticManufactured mp;
  auto rows = run_convergence_study(mp, ElementId::P3N32, StiffnessMode::Rule,
                                    MaterialSampling::QuadraturePoints, {3, 6, 12}, 0.15, 2);
  double order = fitted_order(rows);

  bool pass = std::abs(dt3 - 0.136) < 0.003 && std::abs(fit.coeff - 1.09) < 0.2 * 1.09 &&
              std::abs(fit.exponent - 6.0) < 0.3 && order >= 3.8;
  char buf[220];
  std::snprintf(buf, sizeof buf, "dt(3n32q21)=%.4f, fit %.3f NE^-%.2f, convergence order %.2f; %.0fs",
                dt3, fit.coeff, fit.exponent, order, timer.seconds());
  report(7, "degree-3 dispersion and convergence (data-dependent)", pass, buf);
}

// ---- criterion 8: property suites -------------------------------------------

void criterion8() {
  Timer timer;
  bool pass = true;
  std::string detail;

  // mass Gram positive definite, stiffness-rule seminorm null space = constants
  {
    const auto& t = kernel_tables(ElementId::P2N15);
    pass = pass && t.mass_weights.minCoeff() > 0;
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(t.n, t.n);
    for (int d = 0; d < 3; ++d) S += t.D[d].transpose() * t.rule_weights.asDiagonal() * t.D[d];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    pass = pass && std::abs(es.eigenvalues()(0)) < 1e-11 && es.eigenvalues()(1) > 1e-8;
    detail += "seminorm-null=constants ";
  }

  // elastic strain null space = rigid motions (C7 elastic)
  {
    auto space = element_space(ElementId::P2N15);
    auto screen = check_spurious_free(space.basis, builtin_stiffness_rule(ElementId::P2N15),
                                      FieldMode::Elastic);
    pass = pass && screen.pass && screen.nullspace_dim == 6;
    detail += "strain-null=6 ";
  }

  // global operator symmetry and positive semidefiniteness
  {
    auto mesh = build_block_mesh(2, 2, 2, Eigen::Vector3d::Zero(), Eigen::Vector3d::Ones(), 0.1);
    auto p = build_scalar_problem(std::move(mesh), ElementId::P2N15, StiffnessMode::Rule,
                                  BoundaryKind::Dirichlet, MaterialSampling::QuadraturePoints,
                                  [](const Eigen::Vector3d&) { return 1.2; },
                                  [](const Eigen::Vector3d& x) { return 1.0 + 0.2 * x[0]; });
    std::mt19937_64 rng(8);
    std::normal_distribution<double> normal;
    for (int rep = 0; rep < 3; ++rep) {
      Eigen::VectorXd u(p.size()), v(p.size());
      for (int i = 0; i < p.size(); ++i) {
        u(i) = normal(rng);
        v(i) = normal(rng);
      }
      double a = u.dot(global_matvec(p, v)), b = v.dot(global_matvec(p, u));
      pass = pass && std::abs(a - b) < 1e-11 * (std::abs(a) + 1);
      pass = pass && u.dot(global_matvec(p, u)) > -1e-11 * (std::abs(a) + 1);
    }
    detail += "global-sym ";
  }

  // discrete-energy boundedness at 0.99 dt_max and blow-up at 1.02 dt_max on
  // the single honeycomb cell, driven at the critical wave vector
  {
    const auto& t = kernel_tables(ElementId::P2N15);
    auto cell = build_honeycomb_cell(t.nodes);
    auto op = assemble_bloch_operator(cell, t, StiffnessMode::Rule);
    Eigen::Vector3d kappaStar;
    double sMax = max_spatial_eigenvalue(op, 16, 2, &kappaStar);
    Eigen::MatrixXcd H = bloch_matrix(op, kappaStar);

    // One half-step cosine application: R u = u + sum_k dt^{2k}/(2k)! (-H)^k u.
    auto applyR = [&](const Eigen::VectorXcd& v, double dt) {
      Eigen::VectorXcd y = v, out = v;
      double factorial = 1;
      for (int k = 1; k <= 2; ++k) {
        y = -(H * y).eval();
        factorial *= (2 * k - 1) * (2 * k);
        out += std::pow(dt, 2 * k) / factorial * y;
      }
      return out;
    };

    auto run = [&](double frac, int steps) {
      double dt = frac * std::sqrt(dablain_cK(2) / sMax);
      std::mt19937_64 rng(88);
      std::normal_distribution<double> normal;
      Eigen::VectorXcd u(op.n0);
      for (int i = 0; i < op.n0; ++i) u(i) = std::complex<double>(normal(rng), normal(rng));
      Eigen::VectorXcd uprev = applyR(u, dt);  // zero-velocity start
      double e0 = u.norm();
      // Discrete energy of the two-step recurrence, conserved exactly while
      // the scheme is stable and indefinite beyond the stability limit:
      //   E_n = |u_{n+1}|^2 + |u_n|^2 - 2 Re<u_{n+1}, R u_n>.
      std::vector<double> energies;
      for (int s = 0; s < steps; ++s) {
        Eigen::VectorXcd Ru = applyR(u, dt);
        Eigen::VectorXcd next = 2.0 * Ru - uprev;
        energies.push_back(next.squaredNorm() + u.squaredNorm() - 2.0 * next.dot(Ru).real());
        uprev = u;
        u = next;
        if (u.norm() > 1e9 * e0) break;
      }
      std::vector<double> sorted = energies;
      std::sort(sorted.begin(), sorted.end());
      double median = sorted[sorted.size() / 2];
      return std::make_pair(sorted.back() / median, u.norm() / e0);
    };

    auto stable = run(0.99, 2000);
    auto unstable = run(1.02, 2000);
    pass = pass && stable.first <= 1.05 && unstable.second > 1e3;
    char buf[140];
    std::snprintf(buf, sizeof buf, "energy max/median=%.6f over 2000 steps at 0.99, growth=%.1e at 1.02 ",
                  stable.first, unstable.second);
    detail += buf;
  }

  char buf[64];
  std::snprintf(buf, sizeof buf, "; %.0fs", timer.seconds());
  report(8, "theory stand-in property suite", pass, detail + buf);
}

// ---- criterion 9: operation-count audit --------------------------------------

void criterion9() {
  const auto& t = kernel_tables(ElementId::P2N15);
  auto geom = ElementGeometry::from_jacobian(Eigen::Matrix3d::Identity());
  ElasticTensor Ct = transform_elastic(ElasticTensor::isotropic(1.0, 1.0), geom);
  std::vector<ElasticTensor> samples(t.nq, Ct);
  Eigen::VectorXd u = Eigen::VectorXd::Ones(3 * t.n);

  reset_kernel_op_counters();
  matvec_quad_elastic(t, samples, u);
  auto quadCounts = kernel_op_counters();
  reset_kernel_op_counters();
  matvec_exact_elastic(t, Ct, u);
  auto exactCounts = kernel_op_counters();

  bool pass = quadCounts.d_products == 18 && quadCounts.b_products == 0 &&
              exactCounts.b_products == 27 && exactCounts.d_products == 0;
  char buf[120];
  std::snprintf(buf, sizeof buf, "quad path: %llu D-products; exact path: %llu B-products",
                static_cast<unsigned long long>(quadCounts.d_products),
                static_cast<unsigned long long>(exactCounts.b_products));
  report(9, "elastic operation-count audit (18 vs 27)", pass, buf);
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  if (g_failures) std::printf("%d criterion(s) FAILED\n", g_failures);
  else std::printf("all acceptance criteria passed\n");
  return g_failures ? 1 : 0;
}
