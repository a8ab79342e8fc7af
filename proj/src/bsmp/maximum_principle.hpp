#pragma once

#include "bsmp/adjoint.hpp"
#include "bsmp/bsde.hpp"
#include "bsmp/model.hpp"
#include "bsmp/regression.hpp"
#include "bsmp/restriction.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bsmp {

/// Replace the control by `value` on [tau, tau + width).
struct SpikeSpec {
  double tau = 0.0;
  double width = 0.0;
  Vec value;
};

ControlLaw spike_perturb(const ControlLaw& control, const SpikeSpec& spike, const TimeGrid& grid);

struct SpikeRow {
  double width = 0.0;
  double y_moment = 0.0;  ///< E max_i |y^theta_i - y_i|^2 on the extended state
  double z_moment = 0.0;  ///< E sum_i |z^theta_i - z_i|^2 dt on the extended state
};

struct SpikeStudy {
  std::vector<SpikeRow> rows;
  double y_slope = 0.0;  ///< least-squares slope of log moment against log width
  double z_slope = 0.0;
};

/// Solves the cost-extended problem under `control` and under each spike of
/// width in `widths` (all multiples of dt) on the same bundle.
SpikeStudy spike_convergence_study(const ProblemSpec& spec, const ControlLaw& control, double tau,
                                   const Vec& value, const std::vector<double>& widths,
                                   std::shared_ptr<const BrownianBundle> bundle, const RegressionConfig& config);

/// Least-squares slope of log(values) against log(abscissae); NaN if any value is 0.
double log_log_slope(const std::vector<double>& abscissae, const std::vector<double>& values);

struct Offender {
  int node = 0;  ///< node (or block) index
  int path = 0;
  int atom = 0;  ///< index of the maximizing grid value
  double gap = 0.0;
};

/// Hamiltonian gap statistics over the node x path (or block x path) ensemble.
struct ViolationReport {
  double mean_gap = 0.0;
  double max_gap = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
  double q99 = 0.0;
  double gap_stderr = 0.0;  ///< standard error of the per-path mean gap
  double tolerance = 0.0;
  bool pass = false;
  int blocks = 0;  ///< 0: pointwise in time
  std::size_t samples = 0;
  std::vector<Offender> worst_per_node;
  std::optional<double> support_mass;  ///< relaxed checks only
};

struct CheckOptions {
  /// Negative: max(1e-3, 3 * gap standard error).
  double tolerance = -1.0;
  /// 0 checks every node. B > 0 compares block averages of H over B equal
  /// time blocks (the resolution of piecewise-constant oracle controls).
  int blocks = 0;
};

/// Statistics of gaps laid out [path][unit], with the maximizing grid index
/// per sample. Shared by the strict and relaxed checks.
ViolationReport summarize_gaps(const std::vector<double>& gaps, const std::vector<int>& argmax, int paths,
                               int units, const CheckOptions& options);

/// Empirical maximum condition: gap(i, m) = max_a H(.., a) - H(.., u_i).
ViolationReport check_necessary(const ProblemSpec& spec, const ControlLaw& control, const Trajectory& traj,
                                const AdjointPath& adjoint, const std::vector<Vec>& candidates,
                                const CheckOptions& options = {});

struct SufficiencyReport {
  double convexity_defect = 0.0;  ///< worst g(mid) - mean(g) (positive = violation)
  double concavity_defect = 0.0;  ///< worst mean(H) - H(mid)
  double linearity_defect = 0.0;  ///< relaxed check only
  bool control_set_convex = false;
  bool pass = false;
  int samples = 0;
};

/// Midpoint convexity of g and midpoint concavity of (y, z, v) -> H at random
/// pairs; p drawn uniformly from [p_low, p_high]^n.
SufficiencyReport check_sufficient_assumptions(const ProblemSpec& spec, int samples, std::uint64_t seed,
                                               double p_low = -2.0, double p_high = 2.0);

struct AscentOptions {
  int iterations = 10;
  int resolution = 0;  ///< U grid resolution for box sets (0: default)
  double tie_tolerance = 1e-12;
};

struct AscentResult {
  std::vector<ControlLaw> controls;  ///< iterates, starting with the initial law
  std::vector<CostEstimate> costs;
  std::vector<double> distances;  ///< control distance between consecutive iterates
  std::vector<std::string> warnings;
  bool converged = false;
};

/// Fixed-point iteration on the Hamiltonian argmax. Each step solves the state
/// and adjoint equations, regresses (y, z, p) on W at every node, and proposes
/// the argmax feedback law. If the full proposal does not lower the cost, the
/// update is confined to the nodes with the largest mean gap (halving the
/// fraction until the cost drops). Stops on distance 0, on no improving
/// update, or after `iterations` steps.
AscentResult improve_by_hamiltonian_ascent(const ProblemSpec& spec, const ControlLaw& initial,
                                           std::shared_ptr<const BrownianBundle> bundle,
                                           const RegressionConfig& config, const AscentOptions& options = {});

/// Integer count of (path, node) pairs where the two laws differ.
std::size_t control_mismatch_count(const ControlLaw& u, const ControlLaw& v, const BrownianBundle& bundle);

/// d(u, v) = mean over paths of dt * #{i : u_i != v_i}.
double control_distance(const ControlLaw& u, const ControlLaw& v, const BrownianBundle& bundle);

}  // namespace bsmp
