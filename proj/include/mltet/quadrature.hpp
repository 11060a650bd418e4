// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mltet/poly.hpp"
#include "mltet/refgeom.hpp"

namespace mltet {

enum class ElementId : int { P2N15 = 0, P3N32, P4N60, P4N61, P4N65 };

struct UnknownElement : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ElementId parse_element_id(const std::string& name);  // "p2n15", "2n15", ...
const char* element_name(ElementId id);               // "p2n15"
int element_degree(ElementId id);                     // 2, 3, 4, 4, 4
int element_node_count(ElementId id);                 // 15, 32, 60, 61, 65

struct RuleEntry {
  SymmetricOrbit orbit;
  double weight = 0;  // per point, in units of reference volume
};

struct QuadratureRule {
  std::vector<RuleEntry> entries;
  std::string label;

  int point_count() const;
  double weight_sum() const;  // sum of orbit_size * weight, equals 1/6 if exact on constants
  std::vector<std::pair<Bary, double>> points() const;
};

struct Configuration {
  int k4 = 0, k31 = 0, k22 = 0, k211 = 0, k1111 = 0;
  int param_count() const { return k4 + 2 * k31 + 2 * k22 + 3 * k211 + 4 * k1111; }
  int point_count() const { return k4 + 4 * k31 + 6 * k22 + 12 * k211 + 24 * k1111; }
};

struct GeneratorSet {
  std::vector<BaryPoly> generators;
  std::string label;
};

// Stiffness rules of the four published tables; P4N61 and P4N65 share the
// 60-point rule.
QuadratureRule builtin_stiffness_rule(ElementId id);
// The matching exactness spaces V, one symmetric generator per listed entry.
GeneratorSet builtin_generator_set(ElementId id);

// max over all generators (expanded to their distinct permuted copies) of
// |exact integral - quadrature sum|.
double exactness_defect(const QuadratureRule& rule, const GeneratorSet& gens);

bool check_positivity(const QuadratureRule& rule);  // strict

struct ConfigMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FindOptions {
  int max_trials = 1000;
  int max_newton_iters = 200;
  std::uint64_t seed = 1;
  double residual_tol = 1e-13;
  // Screen applied after C6 and the geometric checks (used for C7).
  std::function<bool(const QuadratureRule&)> admissibility;
};

struct FindStats {
  int trials = 0;
  int converged_inadmissible = 0;
  int diverged = 0;
  int accepted_trial = -1;
  std::vector<double> accepted_residual_history;
};

struct FindResult {
  std::optional<QuadratureRule> rule;
  FindStats stats;
};

// Newton with random restarts on the moment equations of the generator set.
// Unknown ordering: all orbit weights first, then location parameters, orbits
// in type order [4], [3,1], [2,2], [2,1,1], [1,1,1,1]. Analytic Jacobian.
FindResult find_rule(const Configuration& config, const GeneratorSet& gens, const FindOptions& opts);

// Exhausts the trial budget and returns every distinct admissible rule found
// (canonical form, deduplicated at matchTol). A configuration can admit more
// than one valid rule.
std::vector<QuadratureRule> find_rules_all(const Configuration& config, const GeneratorSet& gens,
                                           const FindOptions& opts, double matchTol = 1e-8,
                                           FindStats* stats = nullptr);

// Orbits sorted by (type, first parameter), parameters canonicalized through
// classify_point of the representative.
QuadratureRule canonical_rule(const QuadratureRule& rule);
// Max distance between matched canonical orbits (params and weights); +inf on
// structural mismatch.
double rule_distance(const QuadratureRule& a, const QuadratureRule& b);

// JSON rule files: {label, generator_label, orbits: [{type, params, weight}]}.
void write_rule_file(const std::string& path, const QuadratureRule& rule,
                     const std::string& generatorLabel = "");
QuadratureRule read_rule_file(const std::string& path);

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mltet
