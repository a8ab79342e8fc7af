#include "bsmp/problems.hpp"
#include "bsmp/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bsmp;

TEST(Catalog, ListsFiveProblems) {
  const auto names = problem_names();
  ASSERT_EQ(names.size(), 5u);
  for (const auto& name : names) {
    const auto problem = get_problem(name);
    EXPECT_EQ(problem.name, name);
    EXPECT_NO_THROW(problem.spec.dims.validate());
  }
}

TEST(Catalog, ChatteringProblemHasTwoAtoms) {
  const auto problem = get_problem("P2");
  const auto& atoms = problem.spec.controls.atom_list();
  ASSERT_EQ(atoms.size(), 2u);
  EXPECT_EQ(atoms[0][0], -1.0);
  EXPECT_EQ(atoms[1][0], 1.0);
  EXPECT_FALSE(problem.spec.controls.convex());
  ASSERT_EQ(problem.relaxed_weights.size(), 2u);
}

TEST(Catalog, LinearProblemsCarryParameters) {
  EXPECT_EQ(get_problem("P3a").spec.parameters.at("alpha"), 0.5);
  EXPECT_EQ(get_problem("P3b").spec.parameters.at("beta"), 0.3);
}

TEST(Catalog, UnknownNameThrows) { EXPECT_THROW(get_problem("P9"), ConfigError); }

TEST(Oracle, CandidateCountForAtoms) {
  const auto spec = get_problem("P2").spec;
  const auto result = brute_force_optimum(spec, OracleParams{4, 0, 16, 1.0});
  EXPECT_EQ(result.candidates, 16u);
  EXPECT_EQ(result.pattern.size(), 4u);
  EXPECT_EQ(result.atom_indices.size(), 4u);
}

TEST(Oracle, CandidateCountForBox) {
  const auto spec = get_problem("P0").spec;
  const auto result = brute_force_optimum(spec, OracleParams{4, 5, 16, 1.0});
  EXPECT_EQ(result.atoms.size(), 5u);
  EXPECT_EQ(result.candidates, 625u);
  // Beats the best constant control on the same grid.
  double best_constant = INFINITY;
  for (int a = 0; a < 5; ++a) {
    const auto single = brute_force_optimum(
        [&] {
          auto s = spec;
          s.controls = ControlSet::atoms({result.atoms[static_cast<std::size_t>(a)]});
          return s;
        }(),
        OracleParams{1, 0, 64, 1.0});
    best_constant = std::min(best_constant, single.value);
  }
  EXPECT_LE(result.value, best_constant + 1e-12);
}

TEST(Oracle, SingleBlockSingleAtomIsThatControl) {
  auto spec = get_problem("P2").spec;
  spec.controls = ControlSet::atoms({Vec::Constant(1, 1.0)});
  const auto result = brute_force_optimum(spec, OracleParams{1, 0, 256, 1.0});
  EXPECT_EQ(result.candidates, 1u);
  // y_t = t - 1 under v = +1, so the cost is the integral of (t - 1)^2.
  EXPECT_NEAR(result.value, 1.0 / 3.0, 1e-10);
}

TEST(Oracle, RefinementNeverHurts) {
  const auto spec = get_problem("P0").spec;
  const double coarse = brute_force_optimum(spec, OracleParams{2, 5, 64, 1.0}).value;
  const double fine = brute_force_optimum(spec, OracleParams{4, 5, 32, 1.0}).value;
  EXPECT_LE(fine, coarse + 1e-9);
}

TEST(Oracle, ChatteringValueDecreasesWithBlocks) {
  const auto spec = get_problem("P2").spec;
  double previous = INFINITY;
  for (int blocks : {2, 4, 8}) {
    const double value = brute_force_optimum(spec, OracleParams{blocks, 0, 16, 1.0}).value;
    EXPECT_LT(value, previous) << "blocks=" << blocks;
    EXPECT_GT(value, 0.0);
    previous = value;
  }
}

TEST(Oracle, RefusesStochasticTerminalValue) {
  EXPECT_THROW(brute_force_optimum(get_problem("P1").spec, OracleParams{}), OracleError);
}

TEST(Oracle, RefusesOversizedEnumeration) {
  EXPECT_THROW(brute_force_optimum(get_problem("P0").spec, OracleParams{8, 41, 4, 1.0}), ConfigError);
}

TEST(ResolveControl, Descriptions) {
  const auto problem = get_problem("P1");
  const auto grid = build_grid(1.0, 8);
  EXPECT_NO_THROW(resolve_control(problem, "builtin", grid));
  EXPECT_NO_THROW(resolve_control(problem, "const:-1", grid));
  EXPECT_NO_THROW(resolve_control(problem, "feedback:sign", grid));
  EXPECT_THROW(resolve_control(problem, "const:0.5", grid), ConfigError);
  EXPECT_THROW(resolve_control(problem, "oracle", grid), OracleError);
  EXPECT_THROW(resolve_control(problem, "random", grid), ConfigError);
}

TEST(ParseNumberList, AcceptsAndRejects) {
  const auto values = parse_number_list("1,-0.5,2e-1");
  ASSERT_EQ(values.size(), 3u);
  EXPECT_EQ(values[1], -0.5);
  EXPECT_THROW(parse_number_list("1,,2"), ConfigError);
  EXPECT_THROW(parse_number_list("abc"), ConfigError);
}

TEST(AnalyticSolution, KnownValues) {
  const auto a = analytic_solution("P3a", 0.0, 0.0);
  EXPECT_EQ(a.first, 0.0);
  EXPECT_NEAR(a.second, std::exp(-0.5), 1e-15);
  const auto b = analytic_solution("P3b", 0.0, 0.0);
  EXPECT_NEAR(b.first, -0.3, 1e-15);
  EXPECT_EQ(b.second, 1.0);
  EXPECT_THROW(analytic_solution("P2", 0.0, 0.0), OracleError);
}

TEST(NegatedRunningCost, FlipsSign) {
  const auto spec = get_problem("P2").spec;
  const auto mutant = negate_running_cost(spec);
  const Vec y = Vec::Constant(1, 0.7);
  const Mat z = Mat::Zero(1, 1);
  const Vec v = Vec::Constant(1, 1.0);
  EXPECT_EQ(mutant.running_cost(0.2, y, z, v), -spec.running_cost(0.2, y, z, v));
}
