#include "bsmp/restriction.hpp"

#include "bsmp/errors.hpp"

namespace bsmp {

TerminalShift zero_shift() {
  return {[](CVecRef) { return 0.0; }, "zero"};
}

TerminalShift brownian_shift(int component) {
  if (component < 0) throw ConfigError("Brownian component index must be nonnegative");
  return {[component](CVecRef w) {
            if (component >= w.size()) throw ConfigError("Brownian component index out of range");
            return w[component];
          },
          "W_T[" + std::to_string(component) + "]"};
}

AugmentedProblem augment_problem(const ProblemSpec& base, TerminalShift shift) {
  base.dims.validate();
  if (!shift.value) throw ConfigError("terminal shift has no value map");
  const int n = base.dims.n;
  const int d = base.dims.d;
  const int na = n + 1;

  ProblemSpec s;
  s.name = base.name + "+cost";
  s.dims = {na, d, base.dims.k};
  s.controls = base.controls;
  s.parameters = base.parameters;

  // z of the extended problem is (n+1) x d; its first n rows are the base z.
  s.drift = [b = base.drift, h = base.running_cost, n](double t, CVecRef y, CMatRef z, CVecRef v, VecOut out) {
    const auto yb = y.head(n);
    const auto zb = z.topRows(n);
    b(t, yb, zb, v, out.head(n));
    out[n] = h(t, yb, zb, v);
  };
  s.drift_dy = [by = base.drift_dy, hy = base.running_cost_dy, n](double t, CVecRef y, CMatRef z, CVecRef v,
                                                                   MatOut out) {
    out.setZero();
    const auto yb = y.head(n);
    const auto zb = z.topRows(n);
    Mat top(n, n);
    by(t, yb, zb, v, top);
    out.topLeftCorner(n, n) = top;
    Vec row(n);
    hy(t, yb, zb, v, row);
    out.row(n).head(n) = row.transpose();
  };
  s.drift_dz = [bz = base.drift_dz, hz = base.running_cost_dz, n, d, na](double t, CVecRef y, CMatRef z,
                                                                        CVecRef v, MatOut out) {
    out.setZero();
    const auto yb = y.head(n);
    const auto zb = z.topRows(n);
    Mat base_b(n, n * d);
    bz(t, yb, zb, v, base_b);
    Mat base_h(n, d);
    hz(t, yb, zb, v, base_h);
    for (int l = 0; l < d; ++l) {
      for (int j = 0; j < n; ++j) {
        out.col(j + l * na).head(n) = base_b.col(j + l * n);
        out(n, j + l * na) = base_h(j, l);
      }
    }
  };
  s.running_cost = [](double, CVecRef, CMatRef, CVecRef) { return 0.0; };
  s.running_cost_dy = [](double, CVecRef, CMatRef, CVecRef, VecOut out) { out.setZero(); };
  s.running_cost_dz = [](double, CVecRef, CMatRef, CVecRef, MatOut out) { out.setZero(); };
  s.terminal_cost = [g = base.terminal_cost, n](CVecRef y) { return g(y.head(n)) - y[n]; };
  s.terminal_cost_dy = [gy = base.terminal_cost_dy, n](CVecRef y, VecOut out) {
    gy(y.head(n), out.head(n));
    out[n] = -1.0;
  };
  s.terminal_value = [xi = base.terminal_value, eta = shift.value, n](CVecRef w, VecOut out) {
    xi(w, out.head(n));
    out[n] = eta(w);
  };
  return {base, std::move(s), std::move(shift)};
}

CostEstimate restricted_cost(const AugmentedProblem& aug, const Trajectory& traj) {
  const int n = aug.base.dims.n;
  if (traj.n() != n + 1) throw ConfigError("restricted cost needs a trajectory of the extended problem");
  const int M = traj.paths();
  const int N = traj.steps();
  std::vector<double> samples(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    const auto y0 = traj.y(m, 0);
    samples[static_cast<std::size_t>(m)] =
        aug.base.terminal_cost(y0.head(n)) - y0[n] + aug.shift.value(traj.bundle().state(m, N));
  }
  return CostEstimate::from_samples(std::move(samples));
}

}  // namespace bsmp
