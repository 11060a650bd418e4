// SPDX-License-Identifier: Apache-2.0
#include "mltet/quadrature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"

namespace mltet {

using nlohmann::json;

ElementId parse_element_id(const std::string& name) {
  std::string s = name;
  if (!s.empty() && (s[0] == 'p' || s[0] == 'P')) s = s.substr(1);
  if (s == "2n15") return ElementId::P2N15;
  if (s == "3n32") return ElementId::P3N32;
  if (s == "4n60") return ElementId::P4N60;
  if (s == "4n61") return ElementId::P4N61;
  if (s == "4n65") return ElementId::P4N65;
  throw UnknownElement("unknown element id: " + name);
}

const char* element_name(ElementId id) {
  switch (id) {
    case ElementId::P2N15: return "p2n15";
    case ElementId::P3N32: return "p3n32";
    case ElementId::P4N60: return "p4n60";
    case ElementId::P4N61: return "p4n61";
    case ElementId::P4N65: return "p4n65";
  }
  return "?";
}

int element_degree(ElementId id) {
  switch (id) {
    case ElementId::P2N15: return 2;
    case ElementId::P3N32: return 3;
    default: return 4;
  }
}

int element_node_count(ElementId id) {
  switch (id) {
    case ElementId::P2N15: return 15;
    case ElementId::P3N32: return 32;
    case ElementId::P4N60: return 60;
    case ElementId::P4N61: return 61;
    case ElementId::P4N65: return 65;
  }
  return 0;
}

int QuadratureRule::point_count() const {
  int n = 0;
  for (auto& e : entries) n += e.orbit.size();
  return n;
}

double QuadratureRule::weight_sum() const {
  double s = 0;
  for (auto& e : entries) s += e.orbit.size() * e.weight;
  return s;
}

std::vector<std::pair<Bary, double>> QuadratureRule::points() const {
  std::vector<std::pair<Bary, double>> out;
  for (auto& e : entries)
    for (auto& p : expand_orbit(e.orbit)) out.emplace_back(p, e.weight);
  return out;
}

namespace {

RuleEntry entry31(double c, double w) { return {{OrbitType::T31, {c}}, w}; }
RuleEntry entry22(double d, double w) { return {{OrbitType::T22, {d}}, w}; }
RuleEntry entry211(double f1, double f2, double w) { return {{OrbitType::T211, {f1, f2}}, w}; }
RuleEntry entry4(double w) { return {{OrbitType::T4, {}}, w}; }

}  // namespace

QuadratureRule builtin_stiffness_rule(ElementId id) {
  QuadratureRule r;
  switch (id) {
    case ElementId::P2N15:
      r.label = "q14";
      r.entries = {
          entry31(0.09273525031089123, 0.01224884051939366),
          entry31(0.3108859192633006, 0.01878132095300264),
          entry22(0.04550370412564965, 0.007091003462846911),
      };
      break;
    case ElementId::P3N32:
      r.label = "q21";
      r.entries = {
          entry31(0.08360982293995379, 0.008382813462606309),
          entry31(0.3195556046935656, 0.01062803097330636),
          entry211(0.06366100187501753, 0.3362519222398494, 0.005973459577178217),
          entry4(0.01894177399687740),
      };
      break;
    case ElementId::P4N60:
      r.label = "q51";
      r.entries = {
          entry31(0.04010756377220036, 0.001076330088382485),
          entry31(0.1881144601918900, 0.006422430307819483),
          entry22(0.1124010568611476, 0.003859721113202450),
          entry211(0.04781990270450464, 0.2053222493389064, 0.003162722714222902),
          entry211(0.2347999378738287, 0.03405863749492695, 0.004715130256124021),
          entry211(0.4614535776221135, 0.06693547308143162, 0.001320748780834370),
          entry4(0.003130077388468573),
      };
      break;
    case ElementId::P4N61:
    case ElementId::P4N65:
      r.label = "q60";
      r.entries = {
          entry31(0.04091036488546224, 0.001137453809249273),
          entry31(0.1942594527940223, 0.006907244220995018),
          entry31(0.3166409312612929, 0.004458749819772567),
          entry22(0.02776256108257648, 0.001389883779363477),
          entry22(0.1022199785693040, 0.004236295194116969),
          entry211(0.03511432271187172, 0.2097218125202450, 0.001788418107829456),
          entry211(0.1790174868402900, 0.03980830656880513, 0.003642034272731381),
          entry211(0.4192720711456938, 0.008950317872961031, 0.001477531071582210),
      };
      break;
  }
  return r;
}

namespace {
BaryPoly mono(int a, int b, int c, int d) { return BaryPoly::monomial(a, b, c, d); }
}  // namespace

GeneratorSet builtin_generator_set(ElementId id) {
  GeneratorSet g;
  switch (id) {
    case ElementId::P2N15:
      g.label = "P5";
      g.generators = {mono(1, 0, 0, 0), mono(2, 1, 0, 0), mono(3, 2, 0, 0),
                      mono(2, 1, 1, 0), mono(2, 2, 1, 0), mono(2, 1, 1, 1)};
      break;
    case ElementId::P3N32:
      g.label = "P5+Bf*P3";
      g.generators = {mono(1, 0, 0, 0), mono(2, 1, 0, 0), mono(3, 2, 0, 0), mono(2, 1, 1, 0),
                      mono(3, 2, 1, 0), mono(2, 2, 2, 0), mono(2, 1, 1, 1), mono(2, 2, 1, 1)};
      break;
    case ElementId::P4N60:
      g.label = "P7+Bf*(P5+Bf*P3)+Be*P5";
      g.generators = {mono(1, 0, 0, 0), mono(2, 1, 0, 0), mono(3, 2, 0, 0), mono(4, 3, 0, 0),
                      mono(2, 1, 1, 0), mono(3, 2, 1, 0), mono(4, 3, 1, 0), mono(3, 2, 2, 0),
                      mono(4, 3, 2, 0), mono(3, 3, 3, 0), mono(2, 1, 1, 1), mono(3, 2, 1, 1),
                      mono(4, 3, 1, 1), mono(3, 2, 2, 1), mono(3, 3, 2, 1), mono(3, 2, 2, 2)};
      break;
    case ElementId::P4N61:
    case ElementId::P4N65:
      g.label = "P8+Bf^2*P3+Be*(P5+Bf*P3)";
      g.generators = {mono(1, 0, 0, 0), mono(2, 1, 0, 0), mono(3, 2, 0, 0), mono(4, 3, 0, 0),
                      mono(4, 4, 0, 0), mono(2, 1, 1, 0), mono(3, 2, 1, 0), mono(4, 3, 1, 0),
                      mono(3, 2, 2, 0), mono(4, 3, 2, 0), mono(3, 3, 3, 0), mono(2, 1, 1, 1),
                      mono(3, 2, 1, 1), mono(4, 3, 1, 1), mono(3, 2, 2, 1), mono(4, 3, 2, 1),
                      mono(3, 3, 3, 1), mono(3, 2, 2, 2), mono(3, 3, 2, 2)};
      break;
  }
  return g;
}

double exactness_defect(const QuadratureRule& rule, const GeneratorSet& gens) {
  auto pts = rule.points();
  double defect = 0;
  for (auto& g : gens.generators) {
    for (auto& img : expand_generator(g)) {
      double exact = img.integral();
      double quad = 0;
      for (auto& [p, w] : pts) quad += w * img.eval(p);
      defect = std::max(defect, std::abs(exact - quad));
    }
  }
  return defect;
}

bool check_positivity(const QuadratureRule& rule) {
  for (auto& e : rule.entries)
    if (!(e.weight > 0)) return false;
  return true;
}

namespace {

// Derivative of the orbit representative with respect to each free parameter.
std::vector<Bary> representative_tangents(OrbitType t) {
  switch (t) {
    case OrbitType::T4: return {};
    case OrbitType::T31: return {{1, 1, 1, -3}};
    case OrbitType::T22: return {{1, 1, -1, -1}};
    case OrbitType::T211: return {{1, 1, 0, -2}, {0, 0, 1, -1}};
    case OrbitType::T1111: return {{1, 0, 0, -1}, {0, 1, 0, -1}, {0, 0, 1, -1}};
  }
  return {};
}

struct MomentSystem {
  std::vector<OrbitType> types;          // one per orbit, fixed type order
  std::vector<BaryPoly> gens;            // k generators
  std::vector<std::array<BaryPoly, 4>> baryGrads;  // per generator
  std::vector<double> exact;             // per generator
  int nOrbits = 0, nParams = 0, k = 0;

  // Unknown vector x: [w_0..w_{nOrbits-1}, params...].
  int param_offset(int orbit) const {
    int off = nOrbits;
    for (int o = 0; o < orbit; ++o) off += orbit_param_count(types[o]);
    return off;
  }

  std::vector<SymmetricOrbit> orbits_of(const Eigen::VectorXd& x) const {
    std::vector<SymmetricOrbit> out(types.size());
    for (size_t o = 0; o < types.size(); ++o) {
      out[o].type = types[o];
      int np = orbit_param_count(types[o]);
      int off = param_offset(static_cast<int>(o));
      out[o].params.assign(x.data() + off, x.data() + off + np);
    }
    return out;
  }

  // Residual and Jacobian; returns false if an orbit degenerates.
  bool evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* Jout) const {
    r.setZero(k);
    if (Jout) Jout->setZero(k, k);
    auto orbits = orbits_of(x);
    for (int o = 0; o < nOrbits; ++o) {
      std::vector<std::pair<Bary, std::array<int, 4>>> pts;
      try {
        pts = expand_orbit_with_maps(orbits[o]);
      } catch (const DegenerateOrbit&) {
        return false;
      }
      double w = x(o);
      auto tangents = representative_tangents(types[o]);
      for (int i = 0; i < k; ++i) {
        double sumF = 0;
        std::vector<double> sumGradDot(tangents.size(), 0.0);
        for (auto& [p, map] : pts) {
          sumF += gens[i].eval(p);
          if (Jout) {
            // d f(point)/d theta = grad_bary f(point) . permuted tangent
            for (size_t t = 0; t < tangents.size(); ++t) {
              Bary dir = apply_permutation(map, tangents[t]);
              double dot = 0;
              for (int j = 0; j < 4; ++j) dot += baryGrads[i][j].eval(p) * dir[j];
              sumGradDot[t] += dot;
            }
          }
        }
        r(i) += w * sumF;
        if (Jout) {
          (*Jout)(i, o) += sumF;
          int off = param_offset(o);
          for (size_t t = 0; t < tangents.size(); ++t) (*Jout)(i, off + static_cast<int>(t)) += w * sumGradDot[t];
        }
      }
    }
    for (int i = 0; i < k; ++i) r(i) -= exact[i];
    return true;
  }
};

}  // namespace

namespace {

MomentSystem build_moment_system(const Configuration& config, const GeneratorSet& gens) {
  const int k = static_cast<int>(gens.generators.size());
  if (config.param_count() != k)
    throw ConfigMismatch("configuration has " + std::to_string(config.param_count()) +
                         " parameters but generator set has " + std::to_string(k));
  MomentSystem sys;
  for (int i = 0; i < config.k4; ++i) sys.types.push_back(OrbitType::T4);
  for (int i = 0; i < config.k31; ++i) sys.types.push_back(OrbitType::T31);
  for (int i = 0; i < config.k22; ++i) sys.types.push_back(OrbitType::T22);
  for (int i = 0; i < config.k211; ++i) sys.types.push_back(OrbitType::T211);
  for (int i = 0; i < config.k1111; ++i) sys.types.push_back(OrbitType::T1111);
  sys.nOrbits = static_cast<int>(sys.types.size());
  sys.k = k;
  sys.gens = gens.generators;
  for (auto& g : sys.gens) {
    sys.exact.push_back(g.integral());
    sys.baryGrads.push_back(
        {g.bary_derivative(0), g.bary_derivative(1), g.bary_derivative(2), g.bary_derivative(3)});
  }
  sys.nParams = config.param_count() - sys.nOrbits;
  return sys;
}

enum class TrialKind { Diverged, Inadmissible, Accepted };

struct TrialOutcome {
  TrialKind kind = TrialKind::Diverged;
  QuadratureRule rule;
  std::vector<double> history;
};

TrialOutcome run_newton_trial(const MomentSystem& sys, const FindOptions& opts, int trial, int nPoints) {
  const int k = sys.k;
  std::mt19937_64 rng(opts.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(trial));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Eigen::VectorXd x(k);
  for (int o = 0; o < sys.nOrbits; ++o) x(o) = unit(rng) * (1.0 / 3.0) / nPoints;
  for (int o = 0; o < sys.nOrbits; ++o) {
    int off = sys.param_offset(o);
    switch (sys.types[o]) {
      case OrbitType::T4: break;
      case OrbitType::T31: x(off) = unit(rng) / 3.0; break;
      case OrbitType::T22: x(off) = unit(rng) / 2.0; break;
      case OrbitType::T211:
        x(off) = unit(rng) / 2.0;
        x(off + 1) = unit(rng) / 2.0;
        break;
      case OrbitType::T1111:
        for (int t = 0; t < 3; ++t) x(off + t) = unit(rng) / 3.0;
        break;
    }
  }

  TrialOutcome out;
  Eigen::VectorXd r(k), rNext(k);
  Eigen::MatrixXd J(k, k);
  bool converged = false;
  if (!sys.evaluate(x, r, &J)) return out;
  for (int it = 0; it < opts.max_newton_iters; ++it) {
    double rn = r.lpNorm<Eigen::Infinity>();
    out.history.push_back(rn);
    if (rn < opts.residual_tol) {
      converged = true;
      break;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible()) return out;
    Eigen::VectorXd dx = lu.solve(-r);
    if (!dx.allFinite() || dx.lpNorm<Eigen::Infinity>() > 1e6) return out;
    // Backtracking on the residual norm keeps wild steps from leaving the
    // convergence region.
    double step = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 12; ++bt) {
      Eigen::VectorXd xTry = x + step * dx;
      if (sys.evaluate(xTry, rNext, &J) && rNext.lpNorm<Eigen::Infinity>() < rn) {
        x = xTry;
        r = rNext;
        accepted = true;
        break;
      }
      step /= 2;
    }
    if (!accepted) return out;
  }
  if (!converged) return out;

  out.kind = TrialKind::Inadmissible;
  QuadratureRule rule;
  rule.label = "found";
  bool admissible = true;
  auto orbits = sys.orbits_of(x);
  for (int o = 0; o < sys.nOrbits; ++o) {
    rule.entries.push_back({orbits[o], x(o)});
    try {
      for (auto& p : expand_orbit(orbits[o]))
        if (!inside_closed(p, 1e-12)) admissible = false;
    } catch (const DegenerateOrbit&) {
      admissible = false;
    }
  }
  if (admissible) admissible = check_positivity(rule);
  if (admissible && opts.admissibility) admissible = opts.admissibility(rule);
  if (!admissible) return out;

  out.kind = TrialKind::Accepted;
  out.rule = canonical_rule(rule);
  out.rule.label = "found";
  return out;
}

}  // namespace

FindResult find_rule(const Configuration& config, const GeneratorSet& gens, const FindOptions& opts) {
  MomentSystem sys = build_moment_system(config, gens);
  const int nPoints = config.point_count();
  FindResult result;
  for (int trial = 0; trial < opts.max_trials; ++trial) {
    result.stats.trials = trial + 1;
    TrialOutcome out = run_newton_trial(sys, opts, trial, nPoints);
    if (out.kind == TrialKind::Diverged) {
      ++result.stats.diverged;
    } else if (out.kind == TrialKind::Inadmissible) {
      ++result.stats.converged_inadmissible;
    } else {
      result.stats.accepted_trial = trial;
      result.stats.accepted_residual_history = out.history;
      result.rule = out.rule;
      return result;
    }
  }
  return result;
}

std::vector<QuadratureRule> find_rules_all(const Configuration& config, const GeneratorSet& gens,
                                           const FindOptions& opts, double matchTol, FindStats* stats) {
  MomentSystem sys = build_moment_system(config, gens);
  const int nPoints = config.point_count();
  std::vector<QuadratureRule> found;
  FindStats local;
  for (int trial = 0; trial < opts.max_trials; ++trial) {
    local.trials = trial + 1;
    TrialOutcome out = run_newton_trial(sys, opts, trial, nPoints);
    if (out.kind == TrialKind::Diverged) {
      ++local.diverged;
    } else if (out.kind == TrialKind::Inadmissible) {
      ++local.converged_inadmissible;
    } else {
      bool fresh = true;
      for (auto& r : found)
        if (rule_distance(r, out.rule) < matchTol) fresh = false;
      if (fresh) found.push_back(out.rule);
    }
  }
  if (stats) *stats = local;
  return found;
}

QuadratureRule canonical_rule(const QuadratureRule& rule) {
  QuadratureRule out;
  out.label = rule.label;
  for (auto& e : rule.entries) {
    RuleEntry ce;
    ce.weight = e.weight;
    ce.orbit = classify_point(e.orbit.representative(), 1e-9);
    // Keep the declared type even if parameters sit near a boundary of a
    // coarser type; only the parameters are canonicalized.
    if (ce.orbit.type != e.orbit.type) ce.orbit = e.orbit;
    out.entries.push_back(ce);
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const RuleEntry& a, const RuleEntry& b) {
    if (a.orbit.type != b.orbit.type) return static_cast<int>(a.orbit.type) < static_cast<int>(b.orbit.type);
    double pa = a.orbit.params.empty() ? 0.0 : a.orbit.params[0];
    double pb = b.orbit.params.empty() ? 0.0 : b.orbit.params[0];
    return pa < pb;
  });
  return out;
}

double rule_distance(const QuadratureRule& a, const QuadratureRule& b) {
  QuadratureRule ca = canonical_rule(a), cb = canonical_rule(b);
  if (ca.entries.size() != cb.entries.size()) return std::numeric_limits<double>::infinity();
  double d = 0;
  for (size_t i = 0; i < ca.entries.size(); ++i) {
    auto& ea = ca.entries[i];
    auto& eb = cb.entries[i];
    if (ea.orbit.type != eb.orbit.type) return std::numeric_limits<double>::infinity();
    d = std::max(d, std::abs(ea.weight - eb.weight));
    for (size_t t = 0; t < ea.orbit.params.size(); ++t)
      d = std::max(d, std::abs(ea.orbit.params[t] - eb.orbit.params[t]));
  }
  return d;
}

void write_rule_file(const std::string& path, const QuadratureRule& rule, const std::string& generatorLabel) {
  json j;
  j["label"] = rule.label;
  if (!generatorLabel.empty()) j["generator_label"] = generatorLabel;
  j["orbits"] = json::array();
  for (auto& e : rule.entries) {
    json o;
    o["type"] = orbit_type_name(e.orbit.type);
    o["params"] = e.orbit.params;
    o["weight"] = e.weight;
    j["orbits"].push_back(o);
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

QuadratureRule read_rule_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  QuadratureRule rule;
  try {
    rule.label = j.value("label", "");
    for (auto& o : j.at("orbits")) {
      RuleEntry e;
      e.orbit.type = orbit_type_from_name(o.at("type").get<std::string>());
      e.orbit.params = o.at("params").get<std::vector<double>>();
      e.weight = o.at("weight").get<double>();
      if (static_cast<int>(e.orbit.params.size()) != orbit_param_count(e.orbit.type))
        throw ParseError(path + ": orbit parameter count mismatch");
      rule.entries.push_back(e);
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return rule;
}

}  // namespace mltet
