#pragma once

#include "bsmp/model.hpp"

#include <vector>

namespace bsmp {

struct RegressionConfig {
  int degree = 3;
  /// Ridge added to the non-constant diagonal of the normal matrix. A negative
  /// value selects 1e-10 * trace / basis size.
  double ridge = -1.0;

  void validate() const;
};

/// Number of total-degree-D polynomials in d variables, C(d + D, D).
std::size_t basis_size(int d, int degree);

/// Least-squares projection onto probabilists' Hermite polynomials of the
/// standardized features at one time node. The constant column is never
/// penalized, so fitted values always average to the targets' mean.
///
/// Feature coordinates with zero spread are dropped; with all of them dropped
/// the fit is the plain sample mean.
class NodeRegression {
 public:
  /// `features` is paths x d.
  NodeRegression(const Mat& features, const RegressionConfig& config);

  int basis_size() const { return static_cast<int>(exponents_.size()); }
  int paths() const { return static_cast<int>(design_.rows()); }
  double ridge() const { return ridge_; }

  /// Coefficients (basis x q) for targets (paths x q).
  Mat coefficients(const Mat& targets) const;
  /// Fitted values at the sample points (paths x q).
  Mat fitted(const Mat& targets) const;
  /// Fitted function evaluated at an arbitrary feature point.
  Vec evaluate(CVecRef feature, const Mat& coefficients) const;

 private:
  void basis_row(const double* x, double* row, std::vector<double>& scratch) const;

  int dim_;
  std::vector<int> active_;
  Vec mean_, scale_;
  std::vector<std::vector<int>> exponents_;
  int max_degree_ = 0;
  Mat design_;
  Eigen::LDLT<Mat> solver_;
  double ridge_ = 0.0;
};

/// Fitted values of targets regressed on features (one-shot NodeRegression).
Mat regress(const Mat& features, const Mat& targets, const RegressionConfig& config);

}  // namespace bsmp
