#include "bsmp/maximum_principle.hpp"
#include "bsmp/errors.hpp"
#include "bsmp/problems.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bsmp;

namespace {

Vec scalar(double v) { return Vec::Constant(1, v); }

struct Solved {
  std::shared_ptr<const BrownianBundle> bundle;
  Trajectory traj;
  AdjointPath adjoint;
};

Solved solve_all(const ProblemSpec& spec, const ControlLaw& law, int steps, int paths, std::uint64_t seed) {
  auto bundle = sample_brownian(build_grid(1.0, steps), spec.dims, paths, seed);
  auto traj = solve_bsde(spec, law, bundle, RegressionConfig{});
  auto adjoint = solve_adjoint(spec, law, traj);
  return {bundle, std::move(traj), std::move(adjoint)};
}

}  // namespace

TEST(Spike, ReplacesValuesInsideWindow) {
  const auto spec = get_problem("P2").spec;
  const auto grid = build_grid(1.0, 16);
  const auto base = constant_law(spec.controls, scalar(1.0));
  const auto spiked = spike_perturb(base, SpikeSpec{0.5, 0.25, scalar(-1.0)}, grid);
  const auto bundle = sample_brownian(grid, spec.dims, 4, 1);
  for (int i = 0; i < 16; ++i) {
    const double t = grid.node(i);
    const double expected = (t >= 0.5 && t < 0.75) ? -1.0 : 1.0;
    EXPECT_EQ(spiked(i, bundle->path(0, i))[0], expected) << "node " << i;
  }
  EXPECT_NEAR(control_distance(base, spiked, *bundle), 0.25, 1e-15);
  EXPECT_EQ(control_mismatch_count(base, spiked, *bundle), 4u * 4u);
}

TEST(Spike, RejectsValueOutsideControlSet) {
  const auto spec = get_problem("P2").spec;
  const auto grid = build_grid(1.0, 16);
  const auto base = constant_law(spec.controls, scalar(1.0));
  EXPECT_THROW(spike_perturb(base, SpikeSpec{0.5, 0.25, scalar(0.0)}, grid), ConfigError);
}

TEST(Spike, MomentsShrinkWithWidth) {
  const auto problem = get_problem("P1");
  const auto bundle = sample_brownian(build_grid(1.0, 64), problem.spec.dims, 2000, 3);
  const auto law = constant_law(problem.spec.controls, scalar(0.0));
  const auto study = spike_convergence_study(problem.spec, law, 0.5, scalar(1.0), {0.25, 0.125, 0.0625},
                                             bundle, RegressionConfig{});
  ASSERT_EQ(study.rows.size(), 3u);
  EXPECT_GT(study.rows[0].y_moment, study.rows[2].y_moment);
  EXPECT_GT(study.y_slope, 1.0);
}

TEST(LogLogSlope, PowerLaw) {
  EXPECT_NEAR(log_log_slope({1.0, 2.0, 4.0}, {3.0, 12.0, 48.0}), 2.0, 1e-12);
  EXPECT_TRUE(std::isnan(log_log_slope({1.0, 2.0}, {0.0, 1.0})));
}

TEST(SummarizeGaps, Statistics) {
  const std::vector<double> gaps{0.0, 1.0, 2.0, 3.0};
  const std::vector<int> argmax{0, 1, 0, 1};
  CheckOptions options;
  options.tolerance = 10.0;
  const auto report = summarize_gaps(gaps, argmax, 2, 2, options);
  EXPECT_DOUBLE_EQ(report.mean_gap, 1.5);
  EXPECT_DOUBLE_EQ(report.max_gap, 3.0);
  EXPECT_EQ(report.samples, 4u);
  EXPECT_TRUE(report.pass);
  options.tolerance = 1.0;
  EXPECT_FALSE(summarize_gaps(gaps, argmax, 2, 2, options).pass);
}

TEST(CheckNecessary, SingletonGridHasZeroGap) {
  const auto spec = get_problem("P2").spec;
  const auto law = constant_law(spec.controls, scalar(1.0));
  const auto s = solve_all(spec, law, 32, 500, 4);
  const auto report = check_necessary(spec, law, s.traj, s.adjoint, {scalar(1.0)});
  EXPECT_EQ(report.max_gap, 0.0);
  EXPECT_TRUE(report.pass);
}

TEST(CheckNecessary, SuboptimalConstantFails) {
  // Under v = +1 the adjoint p_t = t^2 - 2t is negative, so -1 wins the argmax.
  const auto spec = get_problem("P2").spec;
  const auto law = constant_law(spec.controls, scalar(1.0));
  const auto s = solve_all(spec, law, 64, 500, 5);
  const auto report = check_necessary(spec, law, s.traj, s.adjoint, spec.controls.atom_list());
  EXPECT_FALSE(report.pass);
  EXPECT_GT(report.mean_gap, 0.5);
  for (const auto& off : report.worst_per_node) {
    if (off.gap > 0.0) EXPECT_EQ(off.atom, 0);
  }
}

TEST(CheckNecessary, BlockModeNeverExceedsPointwise) {
  const auto spec = get_problem("P2").spec;
  const auto law = constant_law(spec.controls, scalar(-1.0));
  const auto s = solve_all(spec, law, 64, 500, 6);
  const auto pointwise = check_necessary(spec, law, s.traj, s.adjoint, spec.controls.atom_list());
  CheckOptions blocks;
  blocks.blocks = 4;
  const auto blocked = check_necessary(spec, law, s.traj, s.adjoint, spec.controls.atom_list(), blocks);
  EXPECT_EQ(blocked.blocks, 4);
  EXPECT_LE(blocked.mean_gap, pointwise.mean_gap + 1e-12);
}

TEST(Sufficiency, ChatteringProblemSatisfiesAssumptions) {
  const auto report = check_sufficient_assumptions(get_problem("P2").spec, 2000, 11);
  EXPECT_TRUE(report.pass);
  EXPECT_LE(report.convexity_defect, 1e-12);
  EXPECT_LE(report.concavity_defect, 1e-12);
}

TEST(Sufficiency, NegatedRunningCostViolatesConcavity) {
  const auto report = check_sufficient_assumptions(negate_running_cost(get_problem("P2").spec), 2000, 11);
  EXPECT_FALSE(report.pass);
  EXPECT_GT(report.concavity_defect, 0.0);
}

TEST(Ascent, NeverRaisesTheCost) {
  const auto problem = get_problem("P0");
  const auto bundle = sample_brownian(build_grid(1.0, 32), problem.spec.dims, 500, 12);
  const auto initial = constant_law(problem.spec.controls, scalar(0.0));
  AscentOptions options;
  options.iterations = 4;
  const auto result = improve_by_hamiltonian_ascent(problem.spec, initial, bundle, RegressionConfig{}, options);
  ASSERT_EQ(result.controls.size(), result.costs.size());
  ASSERT_GE(result.costs.size(), 2u);
  EXPECT_LT(result.costs.back().value, result.costs.front().value);
  for (std::size_t j = 1; j < result.costs.size(); ++j) {
    EXPECT_LE(result.costs[j].value, result.costs[j - 1].value + 1e-12);
  }
  EXPECT_EQ(result.distances.size() + 1, result.controls.size());
}

TEST(Ascent, StopsAtSingletonControlSet) {
  auto spec = get_problem("P2").spec;
  spec.controls = ControlSet::atoms({scalar(1.0)});
  const auto bundle = sample_brownian(build_grid(1.0, 16), spec.dims, 300, 13);
  const auto result =
      improve_by_hamiltonian_ascent(spec, constant_law(spec.controls, scalar(1.0)), bundle, RegressionConfig{});
  EXPECT_TRUE(result.converged);
  EXPECT_EQ(result.controls.size(), 1u);
}

TEST(ControlDistance, OppositeConstantsAndIdentity) {
  const auto spec = get_problem("P2").spec;
  const auto bundle = sample_brownian(build_grid(1.0, 8), spec.dims, 10, 14);
  const auto plus = constant_law(spec.controls, scalar(1.0));
  const auto minus = constant_law(spec.controls, scalar(-1.0));
  EXPECT_DOUBLE_EQ(control_distance(plus, minus, *bundle), 1.0);
  EXPECT_EQ(control_distance(plus, plus, *bundle), 0.0);
  EXPECT_EQ(control_mismatch_count(plus, plus, *bundle), 0u);
  EXPECT_DOUBLE_EQ(control_distance(plus, minus, *bundle), control_distance(minus, plus, *bundle));
}
