#pragma once

#include "bsmp/model.hpp"
#include "bsmp/regression.hpp"

#include <memory>
#include <vector>

namespace bsmp {

/// Discrete solution (y, z) of the controlled BSDE on every path and node.
/// z at the terminal node is stored as zero.
class Trajectory {
 public:
  Trajectory(std::shared_ptr<const BrownianBundle> bundle, int n);

  const BrownianBundle& bundle() const { return *bundle_; }
  std::shared_ptr<const BrownianBundle> bundle_ptr() const { return bundle_; }
  const TimeGrid& grid() const { return bundle_->grid(); }
  int n() const { return n_; }
  int d() const { return d_; }
  int paths() const { return bundle_->paths(); }
  int steps() const { return grid().steps(); }

  Eigen::Map<Vec> y(int m, int i) { return Eigen::Map<Vec>(y_.data() + y_offset(m, i), n_); }
  Eigen::Map<const Vec> y(int m, int i) const { return Eigen::Map<const Vec>(y_.data() + y_offset(m, i), n_); }
  Eigen::Map<Mat> z(int m, int i) { return Eigen::Map<Mat>(z_.data() + z_offset(m, i), n_, d_); }
  Eigen::Map<const Mat> z(int m, int i) const {
    return Eigen::Map<const Mat>(z_.data() + z_offset(m, i), n_, d_);
  }

 private:
  std::size_t y_offset(int m, int i) const {
    return (static_cast<std::size_t>(m) * (steps() + 1) + static_cast<std::size_t>(i)) * n_;
  }
  std::size_t z_offset(int m, int i) const {
    return (static_cast<std::size_t>(m) * (steps() + 1) + static_cast<std::size_t>(i)) * n_ * d_;
  }

  std::shared_ptr<const BrownianBundle> bundle_;
  int n_;
  int d_;
  std::vector<double> y_;
  std::vector<double> z_;
};

/// Monte Carlo estimate of an expectation.
struct CostEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  int paths = 0;
  std::vector<double> samples;  ///< per-path values

  static CostEstimate from_samples(std::vector<double> samples);
};

/// sqrt(a.se^2 + b.se^2).
double combined_standard_error(const CostEstimate& a, const CostEstimate& b);

/// Backward regression sweep. At each node i, from N-1 down to 0:
///   yhat_i = E_i[y_{i+1}],
///   z_i    = E_i[(y_{i+1} - yhat_i) dW_i^T] / dt,
///   y_i    = yhat_i - b(t_i, y_i, z_i, u_i) dt   (Newton on y_i),
/// with E_i the regression on W_{t_i}.
Trajectory solve_bsde(const ProblemSpec& spec, const ControlLaw& control,
                      std::shared_ptr<const BrownianBundle> bundle, const RegressionConfig& config);

/// Mean over paths of g(y_0) + sum_{i<N} h(t_i, y_i, z_i, u_i) dt.
CostEstimate evaluate_cost(const ProblemSpec& spec, const ControlLaw& control, const Trajectory& traj);

/// u(i, W) on every (path, node < N), laid out [m][i][k].
std::vector<double> tabulate_controls(const ControlLaw& control, const BrownianBundle& bundle);

}  // namespace bsmp
