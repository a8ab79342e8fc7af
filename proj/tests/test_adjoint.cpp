#include "bsmp/adjoint.hpp"
#include "bsmp/problems.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace bsmp;

namespace {

ProblemSpec zero_coefficients(double terminal_slope) {
  auto spec = get_problem("P3a").spec;
  spec.drift = [](double, CVecRef, CMatRef, CVecRef, VecOut out) { out.setZero(); };
  spec.drift_dy = [](double, CVecRef, CMatRef, CVecRef, MatOut out) { out.setZero(); };
  spec.terminal_cost = [terminal_slope](CVecRef y) { return terminal_slope * y[0]; };
  spec.terminal_cost_dy = [terminal_slope](CVecRef, VecOut out) { out.setConstant(terminal_slope); };
  return spec;
}

// b = A y, h = y'Qy / 2 in two dimensions.
ProblemSpec linear_quadratic(const Mat& a, const Mat& q) {
  ProblemSpec spec;
  spec.name = "lq";
  spec.dims = Dimensions{2, 1, 1};
  spec.controls = ControlSet::atoms({Vec::Zero(1)});
  spec.drift = [a](double, CVecRef y, CMatRef, CVecRef, VecOut out) { out = a * y; };
  spec.drift_dy = [a](double, CVecRef, CMatRef, CVecRef, MatOut out) { out = a; };
  spec.drift_dz = [](double, CVecRef, CMatRef, CVecRef, MatOut out) { out.setZero(); };
  spec.running_cost = [q](double, CVecRef y, CMatRef, CVecRef) { return 0.5 * y.dot(q * y); };
  spec.running_cost_dy = [q](double, CVecRef y, CMatRef, CVecRef, VecOut out) { out = q * y; };
  spec.running_cost_dz = [](double, CVecRef, CMatRef, CVecRef, MatOut out) { out.setZero(); };
  spec.terminal_cost = [](CVecRef) { return 0.0; };
  spec.terminal_cost_dy = [](CVecRef, VecOut out) { out.setZero(); };
  spec.terminal_value = [](CVecRef, VecOut out) { out.setZero(); };
  return spec;
}

}  // namespace

TEST(Hamiltonian, ZeroCoefficients) {
  auto spec = zero_coefficients(0.0);
  spec.running_cost = [](double, CVecRef, CMatRef, CVecRef) { return 0.0; };
  for (const auto& pt : sample_points(spec, 50, 1)) EXPECT_EQ(hamiltonian(spec, pt.t, pt.y, pt.z, pt.y, pt.v), 0.0);
}

TEST(Hamiltonian, P2Arithmetic) {
  const auto spec = get_problem("P2").spec;
  EXPECT_DOUBLE_EQ(hamiltonian(spec, 0.3, Vec::Constant(1, 1.0), Mat::Zero(1, 1), Vec::Constant(1, 2.0),
                               Vec::Constant(1, -1.0)),
                   -3.0);
}

TEST(Hamiltonian, AffineInP) {
  const auto spec = get_problem("P1").spec;
  for (const auto& pt : sample_points(spec, 100, 2)) {
    const Vec p = Vec::Constant(1, 0.8);
    const double h = spec.h(pt.t, pt.y, pt.z, pt.v);
    const double c = 3.5;
    EXPECT_NEAR(hamiltonian(spec, pt.t, pt.y, pt.z, c * p, pt.v) + h,
                c * (hamiltonian(spec, pt.t, pt.y, pt.z, p, pt.v) + h), 1e-12);
  }
}

TEST(HamiltonianPartials, LinearQuadratic) {
  Mat a(2, 2), q(2, 2);
  a << 0.5, -1.0, 2.0, 0.25;
  q << 2.0, 0.3, 0.3, 1.0;
  const auto spec = linear_quadratic(a, q);
  const Vec y = Vec::LinSpaced(2, -0.4, 1.3);
  const Vec p = Vec::LinSpaced(2, 0.7, -2.0);
  const auto partials = hamiltonian_partials(spec, 0.2, y, Mat::Zero(2, 1), p, Vec::Zero(1));
  EXPECT_LE((partials.dy - (a.transpose() * p - q * y)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(partials.dz.cwiseAbs().maxCoeff(), 0.0);
}

TEST(HamiltonianPartials, FiniteDifferencesOnEveryProblem) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& name : problem_names()) {
    const auto spec = get_problem(name).spec;
    for (const auto& pt : sample_points(spec, 100, 4)) {
      const Vec p = Vec::Constant(1, 2.0 * normal(rng));
      const auto partials = hamiltonian_partials(spec, pt.t, pt.y, pt.z, p, pt.v);
      const double hy = 1e-6 * std::max(1.0, std::abs(pt.y[0]));
      const double fdy = (hamiltonian(spec, pt.t, pt.y.array() + hy, pt.z, p, pt.v) -
                          hamiltonian(spec, pt.t, pt.y.array() - hy, pt.z, p, pt.v)) /
                         (2 * hy);
      EXPECT_LE(fd_relative_error(partials.dy[0], fdy), 1e-6) << name;
      const double hz = 1e-6 * std::max(1.0, std::abs(pt.z(0, 0)));
      const double fdz = (hamiltonian(spec, pt.t, pt.y, pt.z.array() + hz, p, pt.v) -
                          hamiltonian(spec, pt.t, pt.y, pt.z.array() - hz, p, pt.v)) /
                         (2 * hz);
      EXPECT_LE(fd_relative_error(partials.dz(0, 0), fdz), 1e-6) << name;
    }
  }
}

TEST(HamiltonianPartials, ZIndependentCoefficients) {
  const auto spec = get_problem("P0").spec;
  for (const auto& pt : sample_points(spec, 50, 5)) {
    EXPECT_EQ(hamiltonian_partials(spec, pt.t, pt.y, pt.z, pt.y, pt.v).dz.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(SolveAdjoint, ConstantAdjoint) {
  auto spec = zero_coefficients(2.5);
  spec.running_cost = [](double, CVecRef, CMatRef, CVecRef) { return 0.0; };
  const auto bundle = sample_brownian(build_grid(1.0, 16), spec.dims, 500, 1);
  const auto law = constant_law(spec.controls, Vec::Zero(1));
  const auto adj = solve_adjoint(spec, law, solve_bsde(spec, law, bundle, RegressionConfig{}));
  for (int m = 0; m < 500; ++m)
    for (int i = 0; i <= 16; ++i) ASSERT_EQ(adj.p(m, i)[0], 2.5);
}

TEST(SolveAdjoint, P2UnderPlusOne) {
  const auto problem = get_problem("P2");
  const int steps = 256;
  const auto bundle = sample_brownian(build_grid(1.0, steps), problem.spec.dims, 200, 1);
  const auto law = constant_law(problem.spec.controls, Vec::Constant(1, 1.0));
  const auto adj = solve_adjoint(problem.spec, law, solve_bsde(problem.spec, law, bundle, RegressionConfig{}));
  for (int i = 0; i <= steps; i += 32) {
    const double t = bundle->grid().node(i);
    EXPECT_NEAR(adj.p(0, i)[0], t * t - 2.0 * t, 1e-2) << "t=" << t;
  }
  EXPECT_NEAR(adj.p(0, steps)[0], -1.0, 1e-2);
}

TEST(SolveAdjoint, InitialValueIsTerminalCostGradient) {
  for (const auto& name : {"P0", "P1"}) {
    const auto problem = get_problem(name);
    const auto bundle = sample_brownian(build_grid(1.0, 32), problem.spec.dims, 2000, 8);
    const auto law = resolve_control(problem, "feedback:sign", bundle->grid());
    const auto traj = solve_bsde(problem.spec, law, bundle, RegressionConfig{});
    const auto adj = solve_adjoint(problem.spec, law, traj);
    const double p0 = problem.spec.g_y(traj.y(0, 0))[0];
    for (int m = 0; m < 2000; ++m) ASSERT_EQ(adj.p(m, 0)[0], p0);
  }
}

TEST(SolveAdjoint, DeterministicProblemHasDeterministicAdjoint) {
  const auto problem = get_problem("P0");
  const auto bundle = sample_brownian(build_grid(1.0, 64), problem.spec.dims, 2000, 9);
  const auto law = resolve_control(problem, "const:-1", bundle->grid());
  const auto adj = solve_adjoint(problem.spec, law, solve_bsde(problem.spec, law, bundle, RegressionConfig{}));
  double spread = 0.0;
  for (int i = 0; i <= 64; ++i)
    for (int m = 1; m < 2000; ++m) spread = std::max(spread, std::abs(adj.p(m, i)[0] - adj.p(0, i)[0]));
  EXPECT_LE(spread, 1e-10);
}
