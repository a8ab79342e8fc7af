#include "bsmp/relaxed.hpp"
#include "bsmp/errors.hpp"
#include "bsmp/problems.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bsmp;

namespace {

Vec scalar(double v) { return Vec::Constant(1, v); }

Vec pair(double a, double b) {
  Vec w(2);
  w << a, b;
  return w;
}

}  // namespace

TEST(Relaxed, EmbedIsOneHot) {
  const auto spec = get_problem("P2").spec;
  const auto grid = build_grid(1.0, 8);
  const auto bundle = sample_brownian(grid, spec.dims, 3, 1);
  const auto dirac = embed_strict(constant_law(spec.controls, scalar(1.0)), spec.controls.atom_list());
  for (int i = 0; i < 8; ++i) {
    const Vec w = dirac.weights(i, bundle->path(1, i));
    EXPECT_EQ(w[0], 0.0);
    EXPECT_EQ(w[1], 1.0);
  }
}

TEST(Relaxed, WeightsOutsideSimplexRejected) {
  const auto spec = get_problem("P2").spec;
  EXPECT_THROW(constant_relaxed(spec.controls.atom_list(), pair(0.7, 0.7)), ConfigError);
  EXPECT_THROW(constant_relaxed(spec.controls.atom_list(), pair(1.5, -0.5)), ConfigError);
}

TEST(Relaxed, AveragedCoefficientsAreWeightSums) {
  const auto spec = get_problem("P2").spec;
  const auto averaged = average_coefficients(spec, spec.controls.atom_list());
  const Vec y = scalar(0.4);
  const Mat z = Mat::Zero(1, 1);
  EXPECT_DOUBLE_EQ(averaged.b(0.1, y, z, pair(0.75, 0.25))[0], -0.5);
  EXPECT_DOUBLE_EQ(averaged.h(0.1, y, z, pair(0.75, 0.25)), spec.h(0.1, y, z, scalar(1.0)));
  const Vec p = scalar(-1.3);
  EXPECT_NEAR(relaxed_hamiltonian(spec, 0.1, y, z, p, pair(0.3, 0.7), spec.controls.atom_list()),
              0.3 * hamiltonian(spec, 0.1, y, z, p, scalar(-1.0)) + 0.7 * hamiltonian(spec, 0.1, y, z, p, scalar(1.0)),
              1e-15);
}

TEST(Relaxed, ClosedFormCosts) {
  // Constant weights (w, 1 - w) give drift 1 - 2w, y_t = (2w - 1)(T - t) and cost (1 - 2w)^2 T^3 / 3.
  const auto spec = get_problem("P2").spec;
  const auto bundle = sample_brownian(build_grid(1.0, 256), spec.dims, 200, 2);
  const auto quarter = constant_relaxed(spec.controls.atom_list(), pair(0.75, 0.25));
  const auto traj = solve_relaxed_bsde(spec, quarter, bundle, RegressionConfig{});
  EXPECT_NEAR(relaxed_cost(spec, quarter, traj).value, 1.0 / 12.0, 2e-3);

  const auto half = constant_relaxed(spec.controls.atom_list(), pair(0.5, 0.5));
  const auto flat = solve_relaxed_bsde(spec, half, bundle, RegressionConfig{});
  EXPECT_LE(std::abs(relaxed_cost(spec, half, flat).value), 1e-14);
}

TEST(Relaxed, DiracMatchesStrict) {
  const auto spec = get_problem("P2").spec;
  const auto bundle = sample_brownian(build_grid(1.0, 32), spec.dims, 300, 3);
  const auto strict = constant_law(spec.controls, scalar(1.0));
  const auto dirac = embed_strict(strict, spec.controls.atom_list());
  const auto strict_cost = evaluate_cost(spec, strict, solve_bsde(spec, strict, bundle, RegressionConfig{}));
  const auto relaxed = relaxed_cost(spec, dirac, solve_relaxed_bsde(spec, dirac, bundle, RegressionConfig{}));
  EXPECT_NEAR(strict_cost.value, relaxed.value, 1e-12);
}

TEST(Chattering, ScheduleWithinBlocks) {
  const auto spec = get_problem("P2").spec;
  const auto grid = build_grid(1.0, 64);
  const auto bundle = sample_brownian(grid, spec.dims, 2, 4);
  const auto half = constant_relaxed(spec.controls.atom_list(), pair(0.5, 0.5));
  const auto schedule = chattering_sequence(half, 4, grid);
  EXPECT_EQ(schedule.level, 4);
  for (int i = 0; i < 64; ++i) {
    const double expected = (i % 16) < 8 ? -1.0 : 1.0;
    EXPECT_EQ(schedule.law(i, bundle->path(0, i))[0], expected) << "node " << i;
  }
}

TEST(Chattering, LevelMustDivideSteps) {
  const auto spec = get_problem("P2").spec;
  const auto half = constant_relaxed(spec.controls.atom_list(), pair(0.5, 0.5));
  EXPECT_THROW(chattering_sequence(half, 5, build_grid(1.0, 64)), ConfigError);
}

TEST(Chattering, StableGapShrinks) {
  const auto spec = get_problem("P2").spec;
  const auto bundle = sample_brownian(build_grid(1.0, 256), spec.dims, 10, 5);
  const auto half = constant_relaxed(spec.controls.atom_list(), pair(0.5, 0.5));
  const std::vector<TestFunction> functions{[](double, CVecRef a) { return a[0]; }};
  const auto rows = stable_convergence_diagnostic(half, {4, 16, 64}, functions, *bundle);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_GT(rows[0].gap, rows[1].gap);
  EXPECT_GT(rows[1].gap, rows[2].gap);
  EXPECT_NEAR(rows[0].gap / rows[1].gap, 4.0, 0.5);
}

TEST(Chattering, StrictCostsApproachRelaxedValue) {
  const auto spec = get_problem("P2").spec;
  const auto bundle = sample_brownian(build_grid(1.0, 256), spec.dims, 200, 6);
  const auto half = constant_relaxed(spec.controls.atom_list(), pair(0.5, 0.5));
  const auto study = chattering_convergence_study(spec, half, {4, 16}, bundle, RegressionConfig{});
  ASSERT_EQ(study.rows.size(), 2u);
  EXPECT_GT(study.rows[0].cost_gap, study.rows[1].cost_gap);
  EXPECT_GT(study.rows[0].y_moment, study.rows[1].y_moment);
}

TEST(CheckRelaxed, OptimalWeightsPassAndDiracFails) {
  const auto spec = get_problem("P2").spec;
  const auto bundle = sample_brownian(build_grid(1.0, 64), spec.dims, 300, 7);
  const auto atoms = spec.controls.atom_list();

  const auto half = constant_relaxed(atoms, pair(0.5, 0.5));
  const auto traj = solve_relaxed_bsde(spec, half, bundle, RegressionConfig{});
  const auto pass = check_relaxed_necessary(spec, half, traj, solve_relaxed_adjoint(spec, half, traj), atoms);
  EXPECT_TRUE(pass.pass);
  ASSERT_TRUE(pass.support_mass.has_value());

  const auto dirac = embed_strict(constant_law(spec.controls, scalar(1.0)), atoms);
  const auto dtraj = solve_relaxed_bsde(spec, dirac, bundle, RegressionConfig{});
  const auto fail = check_relaxed_necessary(spec, dirac, dtraj, solve_relaxed_adjoint(spec, dirac, dtraj), atoms);
  EXPECT_FALSE(fail.pass);
}

TEST(CheckRelaxed, SufficiencyOnChatteringProblem) {
  const auto spec = get_problem("P2").spec;
  const auto report = check_relaxed_sufficient(spec, spec.controls.atom_list(), 1000, 8);
  EXPECT_TRUE(report.pass);
  EXPECT_LE(report.linearity_defect, 1e-12);
}
