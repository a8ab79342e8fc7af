#include "bsmp/errors.hpp"
#include "bsmp/model.hpp"
#include "bsmp/parallel.hpp"
#include "bsmp/problems.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

using namespace bsmp;

TEST(TimeGrid, UniformNodes) {
  const auto grid = build_grid(1.0, 4);
  const std::vector<double> expected = {0.0, 0.25, 0.5, 0.75, 1.0};
  EXPECT_EQ(grid.nodes(), expected);
  EXPECT_EQ(build_grid(2.0, 1).nodes(), (std::vector<double>{0.0, 2.0}));
  EXPECT_DOUBLE_EQ(build_grid(1.0, 64).dt(), 0.015625);
}

TEST(TimeGrid, StepsSumToHorizon) {
  for (int steps : {1, 3, 7, 64, 1000}) {
    const auto grid = build_grid(1.7, steps);
    double total = 0.0;
    for (int i = 0; i < steps; ++i) total += grid.node(i + 1) - grid.node(i);
    EXPECT_NEAR(total, 1.7, 1e-12);
    EXPECT_EQ(grid.node(steps), 1.7);
  }
}

TEST(TimeGrid, RejectsNonPositive) {
  EXPECT_THROW(build_grid(0.0, 4), ConfigError);
  EXPECT_THROW(build_grid(-1.0, 4), ConfigError);
  EXPECT_THROW(build_grid(1.0, 0), ConfigError);
}

TEST(BrownianBundle, SameSeedIsBitIdentical) {
  const auto grid = build_grid(1.0, 4);
  const auto a = sample_brownian(grid, Dimensions{1, 1, 1}, 10000, 7);
  const auto b = sample_brownian(grid, Dimensions{1, 1, 1}, 10000, 7);
  ASSERT_EQ(a->raw_increments().size(), b->raw_increments().size());
  EXPECT_EQ(std::memcmp(a->raw_increments().data(), b->raw_increments().data(),
                        a->raw_increments().size() * sizeof(double)),
            0);
  const auto c = sample_brownian(grid, Dimensions{1, 1, 1}, 10000, 8);
  EXPECT_NE(a->increment(0, 0)[0], c->increment(0, 0)[0]);
}

TEST(BrownianBundle, IndependentOfWorkerCount) {
  const auto grid = build_grid(1.0, 8);
  const int before = worker_count();
  set_worker_count(1);
  const auto a = sample_brownian(grid, Dimensions{1, 2, 1}, 3000, 5);
  set_worker_count(4);
  const auto b = sample_brownian(grid, Dimensions{1, 2, 1}, 3000, 5);
  set_worker_count(before);
  EXPECT_EQ(std::memcmp(a->raw_states().data(), b->raw_states().data(), a->raw_states().size() * sizeof(double)), 0);
}

TEST(BrownianBundle, Moments) {
  const int steps = 4, paths = 10000;
  const auto grid = build_grid(1.0, steps);
  const auto bundle = sample_brownian(grid, Dimensions{1, 1, 1}, paths, 7);
  double mean = 0.0;
  for (int m = 0; m < paths; ++m)
    for (int i = 0; i < steps; ++i) mean += bundle->increment(m, i)[0];
  mean /= paths * steps;
  EXPECT_LE(std::abs(mean), 4.0 * std::sqrt(grid.dt() / (paths * steps)));
  for (int i = 0; i < steps; ++i) {
    double s = 0.0, sq = 0.0;
    for (int m = 0; m < paths; ++m) {
      s += bundle->increment(m, i)[0];
      sq += bundle->increment(m, i)[0] * bundle->increment(m, i)[0];
    }
    const double var = (sq - s * s / paths) / (paths - 1);
    EXPECT_NEAR(var / grid.dt(), 1.0, 0.05) << "interval " << i;
  }
}

TEST(BrownianBundle, CumulativeStateAndOrigin) {
  const auto grid = build_grid(1.0, 16);
  const auto bundle = sample_brownian(grid, Dimensions{1, 2, 1}, 200, 3);
  for (int m = 0; m < 200; ++m) {
    EXPECT_EQ(bundle->state(m, 0).squaredNorm(), 0.0);
    for (int i = 0; i < 16; ++i) {
      const Vec expected = bundle->state(m, i) + bundle->increment(m, i);
      EXPECT_EQ((bundle->state(m, i + 1) - expected).cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(BrownianBundle, TerminalCovariance) {
  const int paths = 20000;
  const auto bundle = sample_brownian(build_grid(1.0, 8), Dimensions{1, 2, 1}, paths, 11);
  double c00 = 0.0, c11 = 0.0, c01 = 0.0;
  for (int m = 0; m < paths; ++m) {
    const auto w = bundle->state(m, 8);
    c00 += w[0] * w[0];
    c11 += w[1] * w[1];
    c01 += w[0] * w[1];
  }
  EXPECT_NEAR(c00 / paths, 1.0, 0.05);
  EXPECT_NEAR(c11 / paths, 1.0, 0.05);
  EXPECT_LE(std::abs(c01 / paths), 4.0 / std::sqrt(paths));
}

TEST(BrownianBundle, RejectsZeroPaths) {
  EXPECT_THROW(sample_brownian(build_grid(1.0, 4), Dimensions{}, 0, 1), ConfigError);
}

TEST(PathView, SeesOnlyThePast) {
  const auto bundle = sample_brownian(build_grid(1.0, 8), Dimensions{}, 4, 2);
  const auto view = bundle->path(1, 3);
  EXPECT_EQ(view.current()[0], bundle->state(1, 3)[0]);
  EXPECT_EQ(view.at(2)[0], bundle->state(1, 2)[0]);
  EXPECT_THROW(view.at(4), ConfigError);
  EXPECT_EQ(view.until(1).current()[0], bundle->state(1, 1)[0]);
  EXPECT_THROW(view.until(5), ConfigError);
}

TEST(ControlSet, MembershipAndGrid) {
  const auto box = ControlSet::box(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0), 5);
  const auto grid = box.grid();
  ASSERT_EQ(grid.size(), 5u);
  EXPECT_DOUBLE_EQ(grid.front()[0], -1.0);
  EXPECT_DOUBLE_EQ(grid[2][0], 0.0);
  EXPECT_DOUBLE_EQ(grid.back()[0], 1.0);
  EXPECT_EQ(box.grid(41).size(), 41u);
  EXPECT_TRUE(box.contains(Vec::Constant(1, 0.3)));
  EXPECT_FALSE(box.contains(Vec::Constant(1, 1.5)));
  EXPECT_TRUE(box.convex());

  const auto atoms = ControlSet::atoms({Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)});
  EXPECT_TRUE(atoms.contains(Vec::Constant(1, 1.0)));
  EXPECT_FALSE(atoms.contains(Vec::Constant(1, 0.0)));
  EXPECT_EQ(atoms.atom_index(Vec::Constant(1, 1.0)), 1);
  EXPECT_FALSE(atoms.convex());
}

TEST(ControlLaw, ValuesStayInU) {
  const auto set = ControlSet::atoms({Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)});
  const auto bundle = sample_brownian(build_grid(1.0, 4), Dimensions{}, 2, 1);
  const ControlLaw bad(set, [](int, const PathView&, VecOut out) { out[0] = 0.5; }, "bad", true);
  EXPECT_THROW(bad(0, bundle->path(0, 0)), ConfigError);
  const auto law = constant_law(set, Vec::Constant(1, 1.0));
  EXPECT_EQ(law(2, bundle->path(1, 2))[0], 1.0);
  EXPECT_THROW(constant_law(set, Vec::Constant(1, 0.0)), ConfigError);
}

TEST(ValidateSpec, LinearDriftIsExact) {
  const auto report = validate_spec(get_problem("P3a").spec, 100, 7);
  EXPECT_LE(report.worst, 1e-8);
}

TEST(ValidateSpec, NegatedPartialIsNamed) {
  auto spec = get_problem("P3a").spec;
  const auto original = spec.drift_dy;
  spec.drift_dy = [original](double t, CVecRef y, CMatRef z, CVecRef v, MatOut out) {
    original(t, y, z, v, out);
    out = -out;
  };
  try {
    validate_spec(spec, 100, 7);
    FAIL() << "expected a gradient mismatch";
  } catch (const GradientMismatchError& e) {
    EXPECT_EQ(e.partial(), "b_y");
  }
}

TEST(ValidateSpec, QuadraticCostIsFlaggedNotRejected) {
  const auto report = validate_spec(get_problem("P2").spec, 100, 7);
  EXPECT_LE(report.worst, 1e-5);
  EXPECT_NE(std::find(report.flags.begin(), report.flags.end(), "unbounded h"), report.flags.end());
}

TEST(ValidateSpec, EveryBuiltinPasses) {
  for (const auto& name : problem_names()) EXPECT_NO_THROW(validate_spec(get_problem(name).spec, 100, 3)) << name;
}

TEST(Seeds, MixIsDeterministicAndSpreads) {
  EXPECT_EQ(mix_seed(7, 0), mix_seed(7, 0));
  EXPECT_NE(mix_seed(7, 0), mix_seed(7, 1));
  EXPECT_NE(mix_seed(7, 0), mix_seed(8, 0));
}

TEST(ParallelChunks, ExceptionFromLowestChunk) {
  const int before = worker_count();
  set_worker_count(3);
  try {
    parallel_chunks(4 * kChunkSize, [](std::size_t c, std::size_t, std::size_t) {
      if (c >= 1) throw ConfigError("chunk " + std::to_string(c));
    });
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "chunk 1");
  }
  set_worker_count(before);
}
