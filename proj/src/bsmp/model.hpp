#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bsmp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVecRef = Eigen::Ref<const Vec>;
using CMatRef = Eigen::Ref<const Mat>;
using VecOut = Eigen::Ref<Vec>;
using MatOut = Eigen::Ref<Mat>;

/// State (n), Brownian (d) and control (k) dimensions.
struct Dimensions {
  int n = 1;
  int d = 1;
  int k = 1;

  void validate() const;
  bool operator==(const Dimensions&) const = default;
};

/// Uniform grid t_i = i * T / N, i = 0..N.
class TimeGrid {
 public:
  TimeGrid(double horizon, int steps);

  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  double dt() const { return dt_; }
  double node(int i) const { return i == steps_ ? horizon_ : static_cast<double>(i) * dt_; }
  std::vector<double> nodes() const;

 private:
  double horizon_;
  int steps_;
  double dt_;
};

TimeGrid build_grid(double horizon, int steps);

/// Read-only view of one Brownian path up to (and including) the current node.
/// Control laws receive this view and nothing else, so they are adapted by
/// construction: later nodes are not reachable through it.
class PathView {
 public:
  /// `history` holds W at nodes first..node, d values per node.
  PathView(const double* history, int d, int first, int node)
      : history_(history), d_(d), first_(first), node_(node) {}

  /// View holding only the current state w at `node`.
  static PathView at_node(int node, const Vec& w) { return PathView(w.data(), static_cast<int>(w.size()), node, node); }

  int node() const { return node_; }
  int dim() const { return d_; }
  Eigen::Map<const Vec> current() const { return at(node_); }
  /// W at an earlier node j <= node(); throws ConfigError if j is outside the view.
  Eigen::Map<const Vec> at(int j) const;
  /// The same path seen at an earlier node j (first <= j <= node()).
  PathView until(int j) const;

 private:
  const double* history_;
  int d_;
  int first_;
  int node_;
};

/// M sampled Brownian paths on a grid. Path m is drawn from its own generator
/// seeded from (seed, m), so the bundle does not depend on the worker count.
class BrownianBundle {
 public:
  BrownianBundle(TimeGrid grid, int d, int paths, std::uint64_t seed);

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return d_; }
  int paths() const { return paths_; }
  std::uint64_t seed() const { return seed_; }

  Eigen::Map<const Vec> increment(int m, int i) const {
    return Eigen::Map<const Vec>(dw_.data() + (static_cast<std::size_t>(m) * grid_.steps() + i) * d_, d_);
  }
  Eigen::Map<const Vec> state(int m, int i) const {
    return Eigen::Map<const Vec>(w_.data() + (static_cast<std::size_t>(m) * (grid_.steps() + 1) + i) * d_, d_);
  }
  PathView path(int m, int i) const {
    return PathView(w_.data() + static_cast<std::size_t>(m) * (grid_.steps() + 1) * d_, d_, 0, i);
  }

  std::span<const double> raw_increments() const { return dw_; }
  std::span<const double> raw_states() const { return w_; }

 private:
  TimeGrid grid_;
  int d_;
  int paths_;
  std::uint64_t seed_;
  std::vector<double> dw_;
  std::vector<double> w_;
};

std::shared_ptr<const BrownianBundle> sample_brownian(const TimeGrid& grid, const Dimensions& dims,
                                                      int paths, std::uint64_t seed);

/// Admissible control values U.
class ControlSet {
 public:
  enum class Kind { Atoms, Box, Simplex };

  static ControlSet atoms(std::vector<Vec> atoms);
  /// Box [lo, hi] discretized with `resolution` points per axis for maximization.
  static ControlSet box(Vec lo, Vec hi, int resolution);
  /// Probability vectors of length `size` (control argument of averaged specs).
  static ControlSet simplex(int size);

  Kind kind() const { return kind_; }
  int dimension() const { return dim_; }
  int resolution() const { return resolution_; }
  const Vec& lower() const { return lo_; }
  const Vec& upper() const { return hi_; }

  bool contains(CVecRef v, double tol = 1e-12) const;
  bool convex() const { return kind_ != Kind::Atoms || atoms_.size() == 1; }

  /// Finite maximization grid: the atoms themselves, or a uniform grid of the
  /// box ordered lexicographically (first axis most significant, ascending).
  /// `resolution` overrides the box default when positive.
  std::vector<Vec> grid(int resolution = 0) const;

  /// Index of `v` in the atom list, or -1.
  int atom_index(CVecRef v, double tol = 1e-12) const;
  const std::vector<Vec>& atom_list() const { return atoms_; }

  std::string describe() const;

 private:
  Kind kind_ = Kind::Atoms;
  int dim_ = 1;
  int resolution_ = 0;
  std::vector<Vec> atoms_;
  Vec lo_, hi_;
};

using VectorField = std::function<void(double t, CVecRef y, CMatRef z, CVecRef v, VecOut out)>;
using MatrixField = std::function<void(double t, CVecRef y, CMatRef z, CVecRef v, MatOut out)>;
using ScalarField = std::function<double(double t, CVecRef y, CMatRef z, CVecRef v)>;

/// Coefficients of one control problem
///   dy = b(t, y, z, v) dt + z dW,  y_T = xi(W_T),
///   J(v) = E[ g(y_0) + int_0^T h(t, y, z, v) dt ].
///
/// z is an n x d matrix. Partials with respect to z are laid out against the
/// column-major vectorization of z: column j + l*n holds d/dz(j, l).
struct ProblemSpec {
  std::string name;
  Dimensions dims;
  ControlSet controls = ControlSet::atoms({Vec::Zero(1)});
  std::map<std::string, double> parameters;

  VectorField drift;        ///< b -> R^n
  MatrixField drift_dy;     ///< n x n, (r, j) = db_r / dy_j
  MatrixField drift_dz;     ///< n x (n*d)
  ScalarField running_cost;  ///< h
  VectorField running_cost_dy;  ///< n
  MatrixField running_cost_dz;  ///< n x d
  std::function<double(CVecRef y)> terminal_cost;           ///< g
  std::function<void(CVecRef y, VecOut out)> terminal_cost_dy;
  std::function<void(CVecRef w, VecOut out)> terminal_value;  ///< xi as a function of W_T

  // Allocating convenience wrappers.
  Vec b(double t, CVecRef y, CMatRef z, CVecRef v) const;
  Mat b_y(double t, CVecRef y, CMatRef z, CVecRef v) const;
  Mat b_z(double t, CVecRef y, CMatRef z, CVecRef v) const;
  double h(double t, CVecRef y, CMatRef z, CVecRef v) const { return running_cost(t, y, z, v); }
  Vec h_y(double t, CVecRef y, CMatRef z, CVecRef v) const;
  Mat h_z(double t, CVecRef y, CMatRef z, CVecRef v) const;
  double g(CVecRef y) const { return terminal_cost(y); }
  Vec g_y(CVecRef y) const;
  Vec xi(CVecRef w) const;
};

/// Feedback control u(t_i, W up to t_i) with values in U.
class ControlLaw {
 public:
  using Rule = std::function<void(int node, const PathView& path, VecOut out)>;

  ControlLaw(ControlSet set, Rule rule, std::string label, bool time_only);

  /// Evaluates the law and verifies membership in U (ConfigError otherwise).
  void evaluate(int node, const PathView& path, VecOut out) const;
  Vec operator()(int node, const PathView& path) const;

  const std::string& label() const { return label_; }
  bool time_only() const { return time_only_; }
  const ControlSet& control_set() const { return set_; }

 private:
  ControlSet set_;
  Rule rule_;
  std::string label_;
  bool time_only_;
};

ControlLaw constant_law(const ControlSet& set, const Vec& value, std::string label = {});
/// Time-only law taking values[i] at node i (values.size() == N).
ControlLaw schedule_law(const ControlSet& set, std::vector<Vec> values, std::string label);

/// Random evaluation point for coefficient checks: t in [0, 1], y and z
/// standard normal scaled by 2 and 1, v drawn from U.
struct SamplePoint {
  double t = 0.0;
  Vec y;
  Mat z;
  Vec v;
};

std::vector<SamplePoint> sample_points(const ProblemSpec& spec, int count, std::uint64_t seed);

struct ValidationReport {
  std::map<std::string, double> max_relative_error;  ///< per partial
  double worst = 0.0;
  std::vector<std::string> flags;  ///< e.g. "unbounded h"
};

/// Central finite-difference step and relative error used by every gradient check.
double fd_relative_error(double analytic, double numeric);

/// Checks every analytic partial against central differences at `samples`
/// random points and probes the coefficients for growth. Throws
/// GradientMismatchError naming the first partial above `tolerance`.
ValidationReport validate_spec(const ProblemSpec& spec, int samples, std::uint64_t seed,
                               double tolerance = 1e-5);

/// Deterministic per-stream seed derivation (splitmix64).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace bsmp
