#include "bsmp/errors.hpp"
#include "bsmp/regression.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace bsmp;

namespace {

Mat gaussian_features(int paths, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat x(paths, d);
  for (int m = 0; m < paths; ++m)
    for (int c = 0; c < d; ++c) x(m, c) = normal(rng);
  return x;
}

}  // namespace

TEST(BasisSize, TotalDegreeCount) {
  EXPECT_EQ(basis_size(1, 3), 4u);
  EXPECT_EQ(basis_size(2, 2), 6u);
  EXPECT_EQ(basis_size(3, 3), 20u);
  EXPECT_EQ(basis_size(5, 0), 1u);
}

TEST(Regress, ConstantTargetsAreReproduced) {
  const Mat x = gaussian_features(500, 2, 1);
  for (int degree : {0, 1, 3}) {
    const Mat fit = regress(x, Mat::Constant(500, 1, 4.25), RegressionConfig{degree, -1.0});
    EXPECT_LE((fit.array() - 4.25).abs().maxCoeff(), 1e-10) << "degree " << degree;
  }
}

TEST(Regress, LinearTargetsAreReproduced) {
  const Mat x = gaussian_features(1000, 1, 2);
  const Mat fit = regress(x, x, RegressionConfig{1, 0.0});
  EXPECT_LE((fit - x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Regress, NoisyQuadratic) {
  const int paths = 20000;
  const Mat x = gaussian_features(paths, 1, 3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat y(paths, 1);
  for (int m = 0; m < paths; ++m) y(m, 0) = x(m, 0) * x(m, 0) + normal(rng);
  const Mat fit = regress(x, y, RegressionConfig{2, -1.0});
  double sq = 0.0;
  for (int m = 0; m < paths; ++m) sq += std::pow(fit(m, 0) - x(m, 0) * x(m, 0), 2);
  EXPECT_LE(std::sqrt(sq / paths), 0.05);
}

TEST(Regress, InterceptIsNotPenalized) {
  // Heavy ridge shrinks slopes but the fitted mean still equals the target mean.
  const Mat x = gaussian_features(400, 1, 5);
  const Mat y = (3.0 * x).array() + 7.0;
  const Mat fit = regress(x, y, RegressionConfig{2, 1e6});
  EXPECT_NEAR(fit.mean(), y.mean(), 1e-9);
}

TEST(Regress, DegenerateFeaturesGiveTheMean) {
  Mat x = Mat::Zero(100, 1);
  Mat y(100, 1);
  for (int m = 0; m < 100; ++m) y(m, 0) = m;
  const Mat fit = regress(x, y, RegressionConfig{});
  EXPECT_LE((fit.array() - 49.5).abs().maxCoeff(), 1e-12);
}

TEST(Regress, BasisMustFitThePaths) {
  const Mat x = gaussian_features(30, 1, 6);
  EXPECT_THROW(regress(x, x, RegressionConfig{3, -1.0}), ConfigError);  // 4 * 10 > 30
  EXPECT_NO_THROW(regress(x, x, RegressionConfig{2, -1.0}));
}

TEST(Regress, RejectsBadConfig) {
  const Mat x = gaussian_features(100, 1, 7);
  EXPECT_THROW(regress(x, x, RegressionConfig{-1, 0.0}), ConfigError);
  EXPECT_THROW(regress(x, x, RegressionConfig{1, NAN}), ConfigError);
}

TEST(Regress, SingularNormalEquations) {
  // Two identical columns with no ridge.
  Mat x = gaussian_features(200, 2, 8);
  x.col(1) = x.col(0);
  EXPECT_THROW(regress(x, x.col(0), RegressionConfig{1, 0.0}), NumericalError);
}

TEST(NodeRegression, EvaluateMatchesFitted) {
  const Mat x = gaussian_features(800, 2, 9);
  Mat y(800, 1);
  for (int m = 0; m < 800; ++m) y(m, 0) = std::sin(x(m, 0)) + x(m, 1) * x(m, 1);
  const NodeRegression reg(x, RegressionConfig{3, -1.0});
  const Mat beta = reg.coefficients(y);
  const Mat fit = reg.fitted(y);
  for (int m = 0; m < 800; m += 53) EXPECT_NEAR(reg.evaluate(x.row(m).transpose(), beta)[0], fit(m, 0), 1e-12);
  EXPECT_THROW(reg.evaluate(Vec::Zero(3), beta), ConfigError);
}
