#include "bsmp/bsde.hpp"
#include "bsmp/errors.hpp"
#include "bsmp/problems.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bsmp;

namespace {

struct RmseResult {
  double y = 0.0;
  double z = 0.0;
};

// Max over nodes of the path-RMSE against the closed form.
RmseResult closed_form_rmse(const std::string& name, int steps, int paths) {
  const auto problem = get_problem(name);
  const auto grid = build_grid(1.0, steps);
  const auto bundle = sample_brownian(grid, problem.spec.dims, paths, 7);
  const auto law = constant_law(problem.spec.controls, problem.builtin_control);
  const auto traj = solve_bsde(problem.spec, law, bundle, RegressionConfig{});
  RmseResult out;
  for (int i = 0; i <= steps; ++i) {
    double sy = 0.0, sz = 0.0;
    for (int m = 0; m < paths; ++m) {
      const auto [y, z] = analytic_solution(name, grid.node(i), bundle->state(m, i)[0]);
      sy += std::pow(traj.y(m, i)[0] - y, 2);
      if (i < steps) sz += std::pow(traj.z(m, i)(0, 0) - z, 2);
    }
    out.y = std::max(out.y, std::sqrt(sy / paths));
    if (i < steps) out.z = std::max(out.z, std::sqrt(sz / paths));
  }
  return out;
}

ProblemSpec constant_terminal_spec(double c) {
  auto spec = get_problem("P3a").spec;
  spec.drift = [](double, CVecRef, CMatRef, CVecRef, VecOut out) { out.setZero(); };
  spec.drift_dy = [](double, CVecRef, CMatRef, CVecRef, MatOut out) { out.setZero(); };
  spec.terminal_value = [c](CVecRef, VecOut out) { out.setConstant(c); };
  return spec;
}

}  // namespace

TEST(SolveBsde, LinearYDriverMatchesClosedForm) {
  const auto r = closed_form_rmse("P3a", 64, 20000);
  EXPECT_LE(r.y, 0.02);
  EXPECT_LE(r.z, 0.05);
}

TEST(SolveBsde, LinearZDriverMatchesClosedForm) {
  const auto r = closed_form_rmse("P3b", 64, 20000);
  EXPECT_LE(r.y, 0.02);
  EXPECT_LE(r.z, 0.05);
}

TEST(SolveBsde, ConstantTerminalGivesConstantSolution) {
  const auto spec = constant_terminal_spec(2.5);
  const auto grid = build_grid(1.0, 16);
  const auto bundle = sample_brownian(grid, spec.dims, 2000, 3);
  const auto traj = solve_bsde(spec, constant_law(spec.controls, Vec::Zero(1)), bundle, RegressionConfig{});
  for (int m = 0; m < 2000; m += 97) {
    for (int i = 0; i <= 16; ++i) {
      EXPECT_NEAR(traj.y(m, i)[0], 2.5, 1e-12);
      EXPECT_LE(std::abs(traj.z(m, i)(0, 0)), 1e-8);
    }
  }
}

TEST(SolveBsde, TerminalFitAndDeterministicOrigin) {
  const auto problem = get_problem("P1");
  const auto grid = build_grid(1.0, 32);
  const auto bundle = sample_brownian(grid, problem.spec.dims, 4000, 11);
  const auto traj = solve_bsde(problem.spec, constant_law(problem.spec.controls, problem.builtin_control), bundle,
                               RegressionConfig{});
  for (int m = 0; m < 4000; ++m) {
    EXPECT_EQ(traj.y(m, 32)[0], bundle->state(m, 32)[0]);
    EXPECT_EQ(traj.y(m, 0)[0], traj.y(0, 0)[0]);
  }
}

TEST(SolveBsde, ZeroGeneratorIsMartingale) {
  auto spec = get_problem("P3a").spec;
  spec.drift = [](double, CVecRef, CMatRef, CVecRef, VecOut out) { out.setZero(); };
  const auto grid = build_grid(1.0, 64);
  const auto bundle = sample_brownian(grid, spec.dims, 20000, 7);
  const auto traj = solve_bsde(spec, constant_law(spec.controls, Vec::Zero(1)), bundle, RegressionConfig{});
  double worst = 0.0;
  for (int i = 0; i <= 64; ++i) {
    double s = 0.0;
    for (int m = 0; m < 20000; ++m) s += std::pow(traj.y(m, i)[0] - bundle->state(m, i)[0], 2);
    worst = std::max(worst, std::sqrt(s / 20000));
  }
  EXPECT_LE(worst, 0.02);
}

TEST(SolveBsde, DeterministicProblemHasZeroZ) {
  const auto problem = get_problem("P0");
  const auto grid = build_grid(1.0, 32);
  const auto bundle = sample_brownian(grid, problem.spec.dims, 2000, 5);
  const auto traj =
      solve_bsde(problem.spec, constant_law(problem.spec.controls, Vec::Constant(1, 0.5)), bundle, RegressionConfig{});
  for (int m = 0; m < 2000; m += 31)
    for (int i = 0; i < 32; ++i) EXPECT_LE(std::abs(traj.z(m, i)(0, 0)), 1e-8);
}

TEST(EvaluateCost, ConstantRunningCostIntegratesExactly) {
  auto spec = constant_terminal_spec(0.0);
  spec.running_cost = [](double, CVecRef, CMatRef, CVecRef) { return 1.0; };
  spec.terminal_cost = [](CVecRef) { return 0.0; };
  const auto grid = build_grid(1.0, 64);
  const auto bundle = sample_brownian(grid, spec.dims, 100, 1);
  const auto law = constant_law(spec.controls, Vec::Zero(1));
  const auto traj = solve_bsde(spec, law, bundle, RegressionConfig{});
  EXPECT_DOUBLE_EQ(evaluate_cost(spec, law, traj).value, 1.0);
}

TEST(EvaluateCost, ChatteringProblemUnderConstantControl) {
  const auto problem = get_problem("P2");
  const auto grid = build_grid(1.0, 64);
  const auto bundle = sample_brownian(grid, problem.spec.dims, 1000, 7);
  const auto law = constant_law(problem.spec.controls, Vec::Constant(1, 1.0));
  const auto traj = solve_bsde(problem.spec, law, bundle, RegressionConfig{});
  const auto cost = evaluate_cost(problem.spec, law, traj);
  EXPECT_NEAR(cost.value, 1.0 / 3.0, 0.01);
  EXPECT_LE(cost.standard_error, 1e-12);
  for (int i = 0; i <= 64; ++i) EXPECT_NEAR(traj.y(0, i)[0], -(1.0 - grid.node(i)), 1e-12);
}

TEST(EvaluateCost, LinearInRunningCost) {
  auto problem = get_problem("P1");
  const auto grid = build_grid(1.0, 16);
  const auto bundle = sample_brownian(grid, problem.spec.dims, 2000, 9);
  const auto law = constant_law(problem.spec.controls, Vec::Constant(1, 1.0));
  const auto traj = solve_bsde(problem.spec, law, bundle, RegressionConfig{});
  auto first = problem.spec;
  first.terminal_cost = [](CVecRef) { return 0.0; };
  first.running_cost = [](double, CVecRef y, CMatRef, CVecRef) { return y[0] * y[0]; };
  auto second = first;
  second.running_cost = [](double t, CVecRef y, CMatRef, CVecRef) { return t + std::sin(y[0]); };
  auto both = first;
  both.running_cost = [](double t, CVecRef y, CMatRef, CVecRef) { return y[0] * y[0] + (t + std::sin(y[0])); };
  const auto a = evaluate_cost(first, law, traj).samples;
  const auto b = evaluate_cost(second, law, traj).samples;
  const auto c = evaluate_cost(both, law, traj).samples;
  for (std::size_t m = 0; m < a.size(); ++m) EXPECT_NEAR(c[m], a[m] + b[m], 1e-13);
}

TEST(SolveBsde, DimensionMismatchIsConfigError) {
  const auto problem = get_problem("P1");
  const auto grid = build_grid(1.0, 8);
  const auto bundle = sample_brownian(grid, Dimensions{1, 2, 1}, 100, 1);
  EXPECT_THROW(solve_bsde(problem.spec, constant_law(problem.spec.controls, Vec::Zero(1)), bundle,
                          RegressionConfig{}),
               ConfigError);
}
