// SPDX-License-Identifier: Apache-2.0
//
// Command line surface: quadrature-rule verification and search, element
// table digests, Bloch dispersion sweeps, convergence studies, and time
// domain simulation runs. Outputs are '#'-headed CSV files.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "mltet/dispersion.hpp"
#include "mltet/kernels.hpp"
#include "mltet/mesh.hpp"
#include "mltet/quadrature.hpp"
#include "mltet/refelement.hpp"
#include "mltet/solver.hpp"
#include "mltet/version.hpp"

using namespace mltet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitVerify = 2;
constexpr int kExitSearch = 3;
constexpr int kExitUsage = 64;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_header(std::ostream& out, const std::string& config) {
  out << "# mltet " << kVersion << "\n";
  out << "# config: " << config << "\n";
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

std::string method_label(ElementId id, StiffnessMode mode, const std::string& rule) {
  std::string base = element_name(id) + 1;  // drop the leading 'p'
  if (mode == StiffnessMode::Exact) return base;
  if (rule == "mass") return base + "q" + std::to_string(element_node_count(id));
  return base + "q" + std::to_string(builtin_stiffness_rule(id).point_count());
}

int cmd_rules_verify(const std::string& elementName, const std::string& ruleFile, bool quiet) {
  try {
    QuadratureRule rule;
    GeneratorSet gens;
    bool haveElement = !elementName.empty();
    ElementId id{};
    if (haveElement) id = parse_element_id(elementName);

    if (!ruleFile.empty()) {
      rule = read_rule_file(ruleFile);
      if (!haveElement) {
        std::cout << "rule file: " << ruleFile << " points=" << rule.point_count() << "\n";
        bool pos = check_positivity(rule);
        std::cout << "C6 positivity: " << (pos ? "pass" : "FAIL") << "\n";
        return pos ? kExitOk : kExitVerify;
      }
    } else if (haveElement) {
      rule = builtin_stiffness_rule(id);
    } else {
      std::cerr << "need --element or --rule-file\n";
      return kExitUsage;
    }
    gens = builtin_generator_set(id);

    bool allPass = true;
    double defect = exactness_defect(rule, gens);
    bool c8 = defect < 1e-13;
    allPass &= c8;
    double minw = std::numeric_limits<double>::infinity();
    for (auto& e : rule.entries) minw = std::min(minw, e.weight);
    bool c6 = check_positivity(rule);
    allPass &= c6;

    ElementSpace space = element_space(id);
    auto scalar = check_spurious_free(space.basis, rule, FieldMode::Scalar);
    auto elastic = check_spurious_free(space.basis, rule, FieldMode::Elastic);
    allPass &= scalar.pass && elastic.pass;

    if (!quiet) {
      std::cout << "element " << element_name(id) << " rule " << rule.label << " points="
                << rule.point_count() << "\n";
      std::cout << "C6 positivity: " << (c6 ? "pass" : "FAIL") << " (min weight " << fmt(minw) << ")\n";
      std::cout << "C7 spurious-free scalar: " << (scalar.pass ? "pass" : "FAIL")
                << " (null space dim " << scalar.nullspace_dim << ")\n";
      std::cout << "C7 spurious-free elastic: " << (elastic.pass ? "pass" : "FAIL")
                << " (null space dim " << elastic.nullspace_dim << ")\n";
      std::cout << "C8 exactness defect: " << fmt(defect) << " -> " << (c8 ? "pass" : "FAIL") << "\n";
    }
    return allPass ? kExitOk : kExitVerify;
  } catch (const ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitVerify;
  }
}

int cmd_rules_find(const std::string& elementName, const Configuration& config, int trials,
                   std::uint64_t seed, const std::string& outPath, bool screen) {
  try {
    ElementId id = parse_element_id(elementName);
    GeneratorSet gens = builtin_generator_set(id);
    FindOptions opts;
    opts.max_trials = trials;
    opts.seed = seed;
    if (screen) {
      ElementSpace space = element_space(id);
      auto basis = space.basis;
      opts.admissibility = [basis](const QuadratureRule& r) {
        return check_spurious_free(basis, r, FieldMode::Scalar).pass &&
               check_spurious_free(basis, r, FieldMode::Elastic).pass;
      };
    }
    FindResult result = find_rule(config, gens, opts);
    std::cout << "trials=" << result.stats.trials
              << " converged_inadmissible=" << result.stats.converged_inadmissible
              << " diverged=" << result.stats.diverged << "\n";
    if (!result.rule) {
      std::cerr << "no admissible rule found\n";
      return kExitSearch;
    }
    std::cout << "accepted trial " << result.stats.accepted_trial << ", points="
              << result.rule->point_count() << ", defect=" << fmt(exactness_defect(*result.rule, gens))
              << "\n";
    if (!outPath.empty()) write_rule_file(outPath, *result.rule, gens.label);
    return kExitOk;
  } catch (const ConfigMismatch& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitVerify;
  }
}

int cmd_dispersion(const std::string& elementName, const std::string& modeName,
                   const std::string& ruleChoice, int K, const std::string& lambdasCsv, double dtFrac,
                   int nDirections, int grid, const std::string& outPath) {
  try {
    ElementId id = parse_element_id(elementName);
    StiffnessMode mode = (modeName == "exact") ? StiffnessMode::Exact : StiffnessMode::Rule;
    const std::string label = (ruleChoice == "mass") ? mass_rule(id).label : "";
    const KernelTables& tables = kernel_tables(id, mode == StiffnessMode::Rule ? label : "");
    PeriodicCell cell = build_honeycomb_cell(tables.nodes);
    BlochOperator op = assemble_bloch_operator(cell, tables, mode);
    if (K <= 0) K = element_degree(id);

    double sMax = max_spatial_eigenvalue(op, grid);
    double dtMax = std::sqrt(dablain_cK(K) / sMax);
    double dt = dtFrac > 0 ? dtFrac * dtMax : 0.0;

    std::string method = method_label(id, mode, ruleChoice);
    std::ostringstream body;
    std::vector<std::pair<double, double>> fitPoints;
    for (double lambda : parse_list(lambdasCsv)) {
      double e = dispersion_error(op, lambda, K, dt, nDirections);
      double NE = elements_per_wavelength(lambda);
      fitPoints.emplace_back(NE, e);
      body << method << "," << fmt(lambda) << "," << fmt(NE) << "," << fmt(e) << "\n";
    }

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!outPath.empty()) {
      file.open(outPath);
      if (!file) {
        std::cerr << "cannot open " << outPath << "\n";
        return kExitIo;
      }
      out = &file;
    }
    write_header(*out, "dispersion element=" + std::string(element_name(id)) + " mode=" + modeName +
                           " rule=" + ruleChoice + " K=" + std::to_string(K) +
                           " directions=" + std::to_string(nDirections) + " grid=" +
                           std::to_string(grid) + " dt_frac=" + fmt(dtFrac));
    *out << "method,lambda,NE,edisp\n" << body.str();
    try {
      PowerFit fit = fit_power_law(fitPoints);
      *out << "# fit: edisp ~ " << fmt(fit.coeff) << " * NE^-" << fmt(fit.exponent) << "\n";
    } catch (const DegenerateFit&) {
      *out << "# fit: degenerate\n";
    }
    *out << "method,K,s_hmax,dt_max\n";
    *out << method << "," << K << "," << fmt(sMax) << "," << fmt(dtMax) << "\n";
    return kExitOk;
  } catch (const MissingElementData& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitVerify;
  }
}

int cmd_converge(const std::string& elementName, const std::string& modeName,
                 const std::string& policy, const std::string& sizesCsv, double distortion, int K,
                 const std::string& outPath) {
  try {
    ElementId id = parse_element_id(elementName);
    StiffnessMode mode = (modeName == "exact") ? StiffnessMode::Exact : StiffnessMode::Rule;
    MaterialSampling sampling = (policy == "pwconst") ? MaterialSampling::PiecewiseConstant
                                                       : MaterialSampling::QuadraturePoints;
    std::vector<int> sizes;
    for (double v : parse_list(sizesCsv)) sizes.push_back(static_cast<int>(v));

    AcousticManufactured mp;
    auto rows = run_convergence_study(mp, id, mode, sampling, sizes, distortion, K);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!outPath.empty()) {
      file.open(outPath);
      if (!file) {
        std::cerr << "cannot open " << outPath << "\n";
        return kExitIo;
      }
      out = &file;
    }
    write_header(*out, "converge element=" + std::string(element_name(id)) + " mode=" + modeName +
                           " policy=" + policy + " sizes=" + sizesCsv + " distortion=" +
                           fmt(distortion) + " K=" + std::to_string(K));
    *out << "element,mode,N,h,rms,steps,seconds\n";
    std::vector<std::pair<double, double>> fitPoints;
    for (auto& r : rows) {
      fitPoints.emplace_back(static_cast<double>(r.N), r.rms);
      *out << element_name(id) << "," << modeName << "," << r.N << "," << fmt(r.h) << ","
           << fmt(r.rms) << "," << r.steps << "," << fmt(r.seconds) << "\n";
    }
    try {
      PowerFit fit = fit_power_law(fitPoints);
      *out << "# order: rms ~ N^(-1/3 x " << fmt(3.0 * fit.exponent) << ")\n";
    } catch (const DegenerateFit&) {
      *out << "# order: degenerate fit\n";
    }
    return kExitOk;
  } catch (const MissingElementData& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitVerify;
  }
}

// Time derivative of order n of a Ricker wavelet with centre frequency f and
// delay t0, via the Gaussian-Hermite recurrence.
double ricker_derivative(double t, double f, double t0, int n) {
  const double a = M_PI * M_PI * f * f;
  const double tau = t - t0;
  const double x = std::sqrt(a) * tau;
  const int m = n + 2;
  double Hprev = 1, H = 2 * x;  // H_0, H_1
  for (int i = 1; i < m; ++i) {
    double Hnext = 2 * x * H - 2 * i * Hprev;
    Hprev = H;
    H = Hnext;
  }
  double gaussDeriv = std::pow(-std::sqrt(a), m) * (m == 0 ? 1.0 : H) * std::exp(-a * tau * tau);
  return -gaussDeriv / (2 * a);
}

int cmd_simulate(const std::string& specPath, const std::string& outPath, bool snapshots) {
  using nlohmann::json;
  try {
    std::ifstream in(specPath);
    if (!in) {
      std::cerr << "cannot open " << specPath << "\n";
      return kExitIo;
    }
    json spec;
    try {
      in >> spec;
    } catch (const json::exception& e) {
      std::cerr << specPath << ": " << e.what() << "\n";
      return kExitIo;
    }

    TetMesh mesh;
    if (spec.at("mesh").contains("path")) {
      mesh = read_mesh(spec["mesh"]["path"].get<std::string>());
    } else {
      auto cells = spec["mesh"].value("cells", std::vector<int>{4, 4, 4});
      auto lo = spec["mesh"].value("box_lo", std::vector<double>{0, 0, 0});
      auto hi = spec["mesh"].value("box_hi", std::vector<double>{1, 1, 1});
      double dist = spec["mesh"].value("distortion", 0.0);
      mesh = build_block_mesh(cells[0], cells[1], cells[2], Eigen::Vector3d(lo[0], lo[1], lo[2]),
                              Eigen::Vector3d(hi[0], hi[1], hi[2]), dist);
    }

    ElementId id = parse_element_id(spec.value("element", "p2n15"));
    StiffnessMode mode = spec.value("mode", "rule") == std::string("exact") ? StiffnessMode::Exact
                                                                            : StiffnessMode::Rule;
    BoundaryKind boundary = spec.value("boundary", "neumann") == std::string("dirichlet")
                                ? BoundaryKind::Dirichlet
                                : BoundaryKind::Neumann;
    std::string physics = spec.value("physics", "scalar");
    int K = spec.value("K", 2);
    double T = spec.value("T", 1.0);
    double dtFactor = spec.value("dt_factor", 0.99);

    json material = spec.value("material", json{{"name", "unit"}});
    std::string matName = material.value("name", "unit");

    WaveProblem problem;
    AcousticManufactured mp;
    if (physics == "elastic") {
      double rho = material.value("rho", 2.0);
      double vp = material.value("vp", 2.0);
      double vs = material.value("vs", 1.2);
      double mu = rho * vs * vs;
      double lambda = rho * vp * vp - 2 * mu;
      problem = build_elastic_problem(
          std::move(mesh), id, mode, boundary, MaterialSampling::QuadraturePoints,
          [rho](const Eigen::Vector3d&) { return rho; },
          [lambda](const Eigen::Vector3d&) { return lambda; },
          [mu](const Eigen::Vector3d&) { return mu; });
    } else if (matName == "manufactured") {
      problem = build_scalar_problem(
          std::move(mesh), id, mode, boundary, MaterialSampling::QuadraturePoints,
          [&mp](const Eigen::Vector3d& x) { return mp.rho_eq(x); },
          [&mp](const Eigen::Vector3d& x) { return mp.c_eq(x); });
    } else {
      problem = build_scalar_problem(
          std::move(mesh), id, mode, boundary, MaterialSampling::QuadraturePoints,
          [](const Eigen::Vector3d&) { return 1.0; }, [](const Eigen::Vector3d&) { return 1.0; });
    }

    double sigma = estimate_sigma_max(problem);
    double dt = dtFactor * std::sqrt(dablain_cK(K) / sigma);
    int steps = static_cast<int>(std::ceil(T / dt));
    dt = T / steps;

    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(problem.size());
    if (spec.value("initial", "zero") == std::string("manufactured") && physics == "scalar")
      u0 = interpolate_scalar(problem, [&](const Eigen::Vector3d& x) { return mp.pressure(x, 0.0); });

    SourceFn source;
    bool haveSource = spec.contains("source");
    if (haveSource) {
      json src = spec["source"];
      double freq = src.value("frequency", 7.0);
      double delay = src.value("delay", 1.5 / freq);
      auto pos = src.value("position", std::vector<double>{0, 0, 0});
      auto dirv = src.value("direction", std::vector<double>{0, 0, 1});
      Eigen::Vector3d xs(pos[0], pos[1], pos[2]);
      // Nearest free node carries the load.
      int bestFree = 0;
      double bestDist = std::numeric_limits<double>::infinity();
      for (int f = 0; f < problem.dofs.free_count; ++f) {
        double d = (problem.dofs.coords[problem.dofs.free_to_global[f]] - xs).norm();
        if (d < bestDist) {
          bestDist = d;
          bestFree = f;
        }
      }
      Eigen::VectorXd base = Eigen::VectorXd::Zero(problem.size());
      int nc = problem.components();
      for (int v = 0; v < nc; ++v) {
        double comp = (nc == 1) ? 1.0 : dirv[v];
        int idx = v * problem.dofs.free_count + bestFree;
        base(idx) = comp / problem.mass(idx);
      }
      source = [base, freq, delay](double t, int order) {
        return Eigen::VectorXd(ricker_derivative(t, freq, delay, order) * base);
      };
    }

    SimulationState state = make_initial_state(problem, u0, Eigen::VectorXd::Zero(problem.size()), dt, K);
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!outPath.empty()) {
      file.open(outPath);
      if (!file) {
        std::cerr << "cannot open " << outPath << "\n";
        return kExitIo;
      }
      out = &file;
    }
    write_header(*out, "simulate spec=" + specPath + " N=" + std::to_string(problem.size()) +
                           " steps=" + std::to_string(steps) + " dt=" + fmt(dt));
    *out << "step,t,energy\n";
    *out << 0 << "," << fmt(0.0) << "," << fmt(energy_norm(problem, state.u_curr)) << "\n";
    for (int s = 1; s <= steps; ++s) {
      dablain_step(state, problem, haveSource ? &source : nullptr);
      *out << s << "," << fmt(state.time) << "," << fmt(energy_norm(problem, state.u_curr)) << "\n";
      if (!std::isfinite(state.u_curr.norm())) {
        std::cerr << "simulation diverged at step " << s << "\n";
        return kExitVerify;
      }
    }
    if (snapshots && !outPath.empty()) write_snapshot(outPath + ".snap", state.u_curr);
    return kExitOk;
  } catch (const ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const MissingElementData& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitVerify;
  }
}

std::uint64_t fnv1a(const Eigen::MatrixXd& m) {
  std::uint64_t h = 1469598103934665603ull;
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i) {
      // hash a 12-digit rounding so the digest is stable across FMA choices
      long long r = std::llround(m(i, j) * 1e12);
      for (int b = 0; b < 8; ++b) {
        h ^= static_cast<std::uint64_t>((r >> (8 * b)) & 0xff);
        h *= 1099511628211ull;
      }
    }
  return h;
}

int cmd_element_build(const std::string& elementName, const std::string& ruleChoice,
                      bool searchMass, int trials, std::uint64_t seed, const std::string& outPath) {
  try {
    ElementId id = parse_element_id(elementName);
    if (searchMass) {
      ElementSpace space = element_space(id);
      if (id == ElementId::P2N15) {
        std::cerr << "the degree-2 mass nodes are built in\n";
        return kExitUsage;
      }
      MassFindOptions opts;
      opts.max_trials = trials;
      opts.seed = seed;
      auto ansatz = (id == ElementId::P3N32) ? p3n32_mass_ansatz() : p4_mass_ansatz(id);
      MassFindResult res = find_mass_element(space, ansatz, opts);
      std::cout << "trials=" << res.trials << " inadmissible=" << res.converged_inadmissible
                << " diverged=" << res.diverged << "\n";
      if (!res.found) {
        std::cerr << "no admissible mass element found\n";
        return kExitSearch;
      }
      ElementData data{id, "mass", res.nodes, res.orbit_weights};
      std::string path = outPath.empty() ? std::string(element_name(id)) + "_mass.json" : outPath;
      write_element_data(path, data, "derived");
      std::cout << "wrote " << path << "\n";
      return kExitOk;
    }

    const std::string label = (ruleChoice == "mass") ? mass_rule(id).label : "";
    const KernelTables& t = kernel_tables(id, label);
    std::cout << "element " << element_name(id) << " n=" << t.n << " nq=" << t.nq << " rule="
              << t.rule.label << "\n";
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        std::cout << "B[" << i << "][" << j << "] fro=" << fmt(t.B[i][j].norm()) << " digest="
                  << std::hex << fnv1a(t.B[i][j]) << std::dec << "\n";
    for (int i = 0; i < 3; ++i)
      std::cout << "D[" << i << "] fro=" << fmt(t.D[i].norm()) << " digest=" << std::hex
                << fnv1a(t.D[i]) << std::dec << "\n";
    std::cout << "mass weights sum=" << fmt(t.mass_weights.sum()) << "\n";
    return kExitOk;
  } catch (const MissingElementData& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitVerify;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mass-lumped tetrahedral wave elements"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // rules-verify
  std::string rvElement, rvRuleFile;
  auto* rv = app.add_subcommand("rules-verify", "check C6-C8 for a stiffness rule");
  rv->add_option("--element", rvElement, "element id (p2n15, p3n32, p4n60, p4n61, p4n65)");
  rv->add_option("--rule-file", rvRuleFile, "rule file to verify instead of the builtin rule");

  // rules-find
  std::string rfElement, rfOut;
  Configuration rfConfig;
  int rfTrials = 1000;
  std::uint64_t rfSeed = 1;
  bool rfScreen = false;
  auto* rf = app.add_subcommand("rules-find", "search a symmetric rule via Newton restarts");
  rf->add_option("--element", rfElement, "element id (selects the generator set)")->required();
  rf->add_option("--k4", rfConfig.k4, "number of [4] orbits");
  rf->add_option("--k31", rfConfig.k31, "number of [3,1] orbits");
  rf->add_option("--k22", rfConfig.k22, "number of [2,2] orbits");
  rf->add_option("--k211", rfConfig.k211, "number of [2,1,1] orbits");
  rf->add_option("--k1111", rfConfig.k1111, "number of [1,1,1,1] orbits");
  rf->add_option("--trials", rfTrials, "maximum Newton restarts");
  rf->add_option("--seed", rfSeed, "random seed");
  rf->add_option("--out", rfOut, "rule file to write");
  rf->add_flag("--screen", rfScreen, "apply the C7 spurious-mode screen");

  // dispersion
  std::string dpElement, dpMode = "rule", dpRule = "builtin", dpLambdas = "4,5.657,8,11.314,16,22.627";
  std::string dpOut;
  int dpK = 0, dpDirections = 64, dpGrid = 16;
  double dpDtFrac = 0.0;
  auto* dp = app.add_subcommand("dispersion", "Bloch dispersion sweep on the honeycomb cell");
  dp->add_option("--element", dpElement)->required();
  dp->add_option("--mode", dpMode, "exact|rule");
  dp->add_option("--rule", dpRule, "builtin|mass (stiffness rule choice in rule mode)");
  dp->add_option("--K", dpK, "time order parameter (default: element degree)");
  dp->add_option("--lambdas", dpLambdas, "comma list of wavelengths");
  dp->add_option("--dt-frac", dpDtFrac, "time step as fraction of dt_max (0: semidiscrete)");
  dp->add_option("--directions", dpDirections, "direction samples per wavelength");
  dp->add_option("--grid", dpGrid, "wave-vector grid per axis for s_max");
  dp->add_option("--out", dpOut, "output CSV path");

  // converge
  std::string cvElement, cvMode = "rule", cvPolicy = "quad", cvSizes = "4,8,16", cvOut;
  double cvDistortion = 0.15;
  int cvK = 2;
  auto* cv = app.add_subcommand("converge", "manufactured-solution convergence study");
  cv->add_option("--element", cvElement)->required();
  cv->add_option("--mode", cvMode, "exact|rule");
  cv->add_option("--policy", cvPolicy, "quad|pwconst material sampling");
  cv->add_option("--sizes", cvSizes, "comma list of cells per axis");
  cv->add_option("--distortion", cvDistortion, "mesh distortion amplitude");
  cv->add_option("--K", cvK, "time order parameter");
  cv->add_option("--out", cvOut, "output CSV path");

  // simulate
  std::string smSpec, smOut;
  bool smSnapshots = false;
  auto* sm = app.add_subcommand("simulate", "run a problem spec file");
  sm->add_option("--spec", smSpec, "JSON problem spec")->required();
  sm->add_option("--out", smOut, "energy trace CSV path");
  sm->add_flag("--snapshots", smSnapshots, "dump the final field snapshot");

  // element-build
  std::string ebElement, ebRule = "builtin", ebOut;
  bool ebSearch = false;
  int ebTrials = 500;
  std::uint64_t ebSeed = 1;
  auto* eb = app.add_subcommand("element-build", "print kernel table digests / search mass nodes");
  eb->add_option("--element", ebElement)->required();
  eb->add_option("--rule", ebRule, "builtin|mass");
  eb->add_flag("--search-mass", ebSearch, "search mass nodes and weights (writes a data file)");
  eb->add_option("--trials", ebTrials, "search restarts");
  eb->add_option("--seed", ebSeed, "search seed");
  eb->add_option("--out", ebOut, "data file to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (rv->parsed()) return cmd_rules_verify(rvElement, rvRuleFile, false);
  if (rf->parsed()) return cmd_rules_find(rfElement, rfConfig, rfTrials, rfSeed, rfOut, rfScreen);
  if (dp->parsed())
    return cmd_dispersion(dpElement, dpMode, dpRule, dpK, dpLambdas, dpDtFrac, dpDirections, dpGrid, dpOut);
  if (cv->parsed()) return cmd_converge(cvElement, cvMode, cvPolicy, cvSizes, cvDistortion, cvK, cvOut);
  if (sm->parsed()) return cmd_simulate(smSpec, smOut, smSnapshots);
  if (eb->parsed()) return cmd_element_build(ebElement, ebRule, ebSearch, ebTrials, ebSeed, ebOut);
  return kExitUsage;
}
