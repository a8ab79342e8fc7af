#pragma once

#include "bsmp/model.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bsmp {

/// Enumeration settings for the brute-force oracle.
struct OracleParams {
  int blocks = 4;       ///< number of piecewise-constant control blocks B
  int resolution = 0;   ///< points per axis for box U (0: the set's default); atoms ignore it
  int substeps = 16;    ///< RK4 steps per block
  double horizon = 1.0;

  /// Fine time resolution of the oracle (blocks * substeps).
  int fine_steps() const { return blocks * substeps; }
};

struct BuiltinProblem {
  std::string name;
  std::string title;
  ProblemSpec spec;
  double horizon = 1.0;
  /// Control used by `--control builtin`.
  Vec builtin_control;
  /// Oracle settings used by `--control oracle`, when the oracle applies.
  std::optional<OracleParams> oracle;
  /// Reference relaxed weights over spec.controls atoms, when meaningful.
  std::vector<double> relaxed_weights;
  std::string oracle_note;  ///< closed form or enumeration description
};

/// Catalog lookup: P0, P1, P2, P3a, P3b. Unknown names raise ConfigError.
BuiltinProblem get_problem(const std::string& name);
std::vector<std::string> problem_names();

/// Variant of a built-in with running cost h replaced by -h (concavity mutant).
ProblemSpec negate_running_cost(const ProblemSpec& spec);

struct OracleResult {
  std::vector<Vec> pattern;       ///< per-block control values
  std::vector<int> atom_indices;  ///< per-block index into `atoms`
  std::vector<Vec> atoms;         ///< enumeration grid
  double value = 0.0;
  std::size_t candidates = 0;
  OracleParams params;
};

/// Exhaustive search over piecewise-constant time-only controls on B blocks.
/// The backward ODE y' = b(t, y, 0, c), y_T = xi, and the running cost are
/// integrated with RK4; ties resolve to the lexicographically smallest index
/// vector. Requires deterministic xi and z-independent b and h.
OracleResult brute_force_optimum(const ProblemSpec& spec, const OracleParams& params);

/// Time-only law following the oracle pattern on `grid` (block by node time).
ControlLaw oracle_law(const ProblemSpec& spec, const OracleResult& result, const TimeGrid& grid);

/// Control from a command-line style description:
///   builtin | const:<v1,..> | oracle | feedback:sign (v = +1 if W_t >= 0 else -1).
/// The oracle form runs the brute-force search with the problem's settings.
ControlLaw resolve_control(const BuiltinProblem& problem, const std::string& description, const TimeGrid& grid);

/// Parses "a,b,c" into numbers (ConfigError on malformed input).
std::vector<double> parse_number_list(const std::string& text);

/// Closed-form (y, z) for P3a and P3b; horizon T.
std::pair<double, double> analytic_solution(const std::string& name, double t, double w, double horizon = 1.0);

}  // namespace bsmp
