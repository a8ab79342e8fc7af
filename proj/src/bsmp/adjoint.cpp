#include "bsmp/adjoint.hpp"

#include "bsmp/errors.hpp"
#include "bsmp/parallel.hpp"

#include <cmath>

namespace bsmp {

double hamiltonian(const ProblemSpec& spec, double t, CVecRef y, CMatRef z, CVecRef p, CVecRef v) {
  Vec drift(spec.dims.n);
  spec.drift(t, y, z, v, drift);
  return p.dot(drift) - spec.running_cost(t, y, z, v);
}

namespace {

/// Buffers for repeated partial evaluations along a path.
struct PartialsWorkspace {
  PartialsWorkspace(int n, int d) : by(n, n), bz(n, n * d), hy(n), hz(n, d), flat(n * d), dy(n), dz(n, d) {}
  Mat by, bz;
  Vec hy;
  Mat hz;
  Vec flat, dy;
  Mat dz;

  void evaluate(const ProblemSpec& spec, double t, CVecRef y, CMatRef z, CVecRef p, CVecRef v) {
    spec.drift_dy(t, y, z, v, by);
    spec.drift_dz(t, y, z, v, bz);
    spec.running_cost_dy(t, y, z, v, hy);
    spec.running_cost_dz(t, y, z, v, hz);
    dy.noalias() = by.transpose() * p;
    dy -= hy;
    flat.noalias() = bz.transpose() * p;
    dz = Eigen::Map<const Mat>(flat.data(), hz.rows(), hz.cols()) - hz;
  }
};

}  // namespace

HamiltonianPartials hamiltonian_partials(const ProblemSpec& spec, double t, CVecRef y, CMatRef z, CVecRef p,
                                         CVecRef v) {
  PartialsWorkspace ws(spec.dims.n, spec.dims.d);
  ws.evaluate(spec, t, y, z, p, v);
  return {ws.dy, ws.dz};
}

AdjointPath::AdjointPath(std::shared_ptr<const BrownianBundle> bundle, int n) : bundle_(std::move(bundle)), n_(n) {
  p_.assign(static_cast<std::size_t>(bundle_->paths()) * (bundle_->grid().steps() + 1) * n_, 0.0);
}

AdjointPath solve_adjoint(const ProblemSpec& spec, const ControlLaw& control, const Trajectory& traj) {
  const int n = spec.dims.n;
  const int d = spec.dims.d;
  const int k = spec.dims.k;
  if (traj.n() != n || traj.d() != d) throw ConfigError("trajectory shape does not match the problem");
  const auto& bundle = traj.bundle();
  const auto& grid = bundle.grid();
  const int N = grid.steps();
  const double dt = grid.dt();
  const auto controls = tabulate_controls(control, bundle);

  AdjointPath adj(traj.bundle_ptr(), n);
  parallel_chunks(static_cast<std::size_t>(bundle.paths()), [&](std::size_t, std::size_t begin, std::size_t end) {
    Vec gy(n);
    PartialsWorkspace ws(n, d);
    for (std::size_t mm = begin; mm < end; ++mm) {
      const int m = static_cast<int>(mm);
      spec.terminal_cost_dy(traj.y(m, 0), gy);
      adj.p(m, 0) = gy;
      for (int i = 0; i < N; ++i) {
        const Eigen::Map<const Vec> u(controls.data() + (mm * N + static_cast<std::size_t>(i)) * k, k);
        ws.evaluate(spec, grid.node(i), traj.y(m, i), traj.z(m, i), adj.p(m, i), u);
        adj.p(m, i + 1) = adj.p(m, i) - ws.dy * dt - ws.dz * bundle.increment(m, i);
        if (!adj.p(m, i + 1).allFinite()) throw DivergenceError("adjoint", i + 1, m);
      }
    }
  });
  return adj;
}

AdjointPath reduce_adjoint(const AdjointPath& extended, double tolerance) {
  const int na = extended.n();
  if (na < 2) throw ConfigError("reduce_adjoint needs an extended adjoint of dimension n + 1");
  const int n = na - 1;
  AdjointPath out(extended.bundle_ptr(), n);
  for (int m = 0; m < extended.paths(); ++m) {
    for (int i = 0; i <= extended.steps(); ++i) {
      const auto p = extended.p(m, i);
      const double drift = std::abs(p[n] + 1.0);
      if (!(drift <= tolerance)) {
        throw InvariantViolation("cost component of the extended adjoint is " + std::to_string(p[n]) +
                                 " at node " + std::to_string(i) + ", path " + std::to_string(m) +
                                 " (expected -1)");
      }
      out.p(m, i) = p.head(n);
    }
  }
  return out;
}

}  // namespace bsmp
