#pragma once

#include "bsmp/adjoint.hpp"
#include "bsmp/bsde.hpp"
#include "bsmp/maximum_principle.hpp"
#include "bsmp/model.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace bsmp {

/// Probability weights over a finite atom list of U, as an adapted feedback.
class RelaxedControlLaw {
 public:
  using Rule = std::function<void(int node, const PathView& path, VecOut weights)>;

  RelaxedControlLaw(std::vector<Vec> atoms, Rule rule, std::string label, bool time_only);

  /// Weights at (node, path); verifies they lie in the simplex (ConfigError otherwise).
  void weights(int node, const PathView& path, VecOut out) const;
  Vec weights(int node, const PathView& path) const;

  const std::vector<Vec>& atoms() const { return atoms_; }
  int size() const { return static_cast<int>(atoms_.size()); }
  const std::string& label() const { return label_; }
  bool time_only() const { return time_only_; }

  /// The weight map as a control law on the simplex; the argument expected by
  /// the averaged problem.
  ControlLaw as_weight_law() const;

 private:
  std::vector<Vec> atoms_;
  Rule rule_;
  std::string label_;
  bool time_only_;
};

RelaxedControlLaw constant_relaxed(std::vector<Vec> atoms, Vec weights, std::string label = {});

/// One-hot weights at the atom matching the strict control's value.
RelaxedControlLaw embed_strict(const ControlLaw& control, std::vector<Vec> atoms);

/// Problem whose control argument is a weight vector w over `atoms`:
///   b(t, y, z, w) = sum_l w_l b(t, y, z, a_l), and likewise for h and all partials.
ProblemSpec average_coefficients(const ProblemSpec& spec, const std::vector<Vec>& atoms);

Trajectory solve_relaxed_bsde(const ProblemSpec& spec, const RelaxedControlLaw& q,
                              std::shared_ptr<const BrownianBundle> bundle, const RegressionConfig& config);
CostEstimate relaxed_cost(const ProblemSpec& spec, const RelaxedControlLaw& q, const Trajectory& traj);
AdjointPath solve_relaxed_adjoint(const ProblemSpec& spec, const RelaxedControlLaw& q, const Trajectory& traj);

/// sum_l w_l H(t, y, z, p, a_l).
double relaxed_hamiltonian(const ProblemSpec& spec, double t, CVecRef y, CMatRef z, CVecRef p, CVecRef weights,
                           const std::vector<Vec>& atoms);

struct ChatteringSchedule {
  int level = 0;
  ControlLaw law;
};

/// Strict control switching through the atoms inside each of `level` equal
/// blocks. At in-block position s in [0, 1) it emits the first atom whose
/// cumulative weight, taken at the block's first node, exceeds s.
ChatteringSchedule chattering_sequence(const RelaxedControlLaw& q, int level, const TimeGrid& grid);

using TestFunction = std::function<double(double t, CVecRef a)>;

struct StableRow {
  int level = 0;
  int function = 0;
  double gap = 0.0;
};

/// For each level and test function f: path mean of
///   (1/T) int_0^T | int_0^t (f(s, u^n_s) - sum_l w_l(s) f(s, a_l)) ds | dt.
std::vector<StableRow> stable_convergence_diagnostic(const RelaxedControlLaw& q, const std::vector<int>& levels,
                                                     const std::vector<TestFunction>& functions,
                                                     const BrownianBundle& bundle);

struct ChatteringRow {
  int level = 0;
  double y_moment = 0.0;  ///< E max_i |y^n - y^q|^2
  double z_moment = 0.0;  ///< E sum_i |z^n - z^q|^2 dt
  double cost_gap = 0.0;  ///< |J(u^n) - J(q)|
  double strict_cost = 0.0;
  double strict_cost_stderr = 0.0;
  double p_moment = 0.0;  ///< E max_i |p^n - p^q|^2
  // Time-integrated mean-square gaps between the u^n evaluation along
  // (y^n, z^n) and the weight average along (y^q, z^q).
  double b_y_gap = 0.0;
  double b_z_gap = 0.0;
  double h_y_gap = 0.0;
  double h_z_gap = 0.0;
};

struct ChatteringStudy {
  CostEstimate relaxed;
  std::vector<ChatteringRow> rows;
};

ChatteringStudy chattering_convergence_study(const ProblemSpec& spec, const RelaxedControlLaw& q,
                                             const std::vector<int>& levels,
                                             std::shared_ptr<const BrownianBundle> bundle,
                                             const RegressionConfig& config);

struct NearOptimalityLevel {
  int level = 0;
  double epsilon = 0.0;      ///< J(u^n) - J(q), clamped at 0 when within one standard error
  double epsilon_raw = 0.0;
  double epsilon_stderr = 0.0;
  bool clamped = false;
  double ratio = 0.0;  ///< max gap / epsilon (NaN when epsilon is 0)
  ViolationReport gaps;
};

struct NearOptimalityReport {
  std::vector<NearOptimalityLevel> levels;
  bool epsilon_decreasing = false;
  bool gap_decreasing = false;
  double ratio_spread = 0.0;  ///< max ratio / min ratio over levels with epsilon above its stderr
  bool ratio_bounded = false;  ///< ratio_spread <= 10
};

NearOptimalityReport near_optimality_check(const ProblemSpec& spec, const RelaxedControlLaw& q,
                                           const std::vector<int>& levels,
                                           std::shared_ptr<const BrownianBundle> bundle,
                                           const RegressionConfig& config, const std::vector<Vec>& candidates);

/// Gap of max over candidates of H against the weighted Hamiltonian; also
/// reports the mean weight carried by atoms within tolerance of the maximum.
ViolationReport check_relaxed_necessary(const ProblemSpec& spec, const RelaxedControlLaw& q, const Trajectory& traj,
                                        const AdjointPath& adjoint, const std::vector<Vec>& candidates,
                                        const CheckOptions& options = {});

/// Exact linearity of the weighted Hamiltonian in the weights and midpoint
/// concavity in (y, z) at random weights.
SufficiencyReport check_relaxed_sufficient(const ProblemSpec& spec, const std::vector<Vec>& atoms, int samples,
                                           std::uint64_t seed);

}  // namespace bsmp
