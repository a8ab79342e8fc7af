#include "bsmp/bsde.hpp"

#include "bsmp/errors.hpp"
#include "bsmp/parallel.hpp"

#include <cmath>
#include <numeric>

namespace bsmp {

Trajectory::Trajectory(std::shared_ptr<const BrownianBundle> bundle, int n)
    : bundle_(std::move(bundle)), n_(n), d_(bundle_->dim()) {
  const auto nodes = static_cast<std::size_t>(bundle_->paths()) * static_cast<std::size_t>(steps() + 1);
  y_.assign(nodes * static_cast<std::size_t>(n_), 0.0);
  z_.assign(nodes * static_cast<std::size_t>(n_ * d_), 0.0);
}

CostEstimate CostEstimate::from_samples(std::vector<double> samples) {
  CostEstimate est;
  est.paths = static_cast<int>(samples.size());
  if (samples.empty()) return est;
  double sum = 0.0;
  for (double s : samples) sum += s;
  est.value = sum / static_cast<double>(samples.size());
  if (samples.size() > 1) {
    double sq = 0.0;
    for (double s : samples) sq += (s - est.value) * (s - est.value);
    const double var = sq / static_cast<double>(samples.size() - 1);
    est.standard_error = std::sqrt(var / static_cast<double>(samples.size()));
  }
  est.samples = std::move(samples);
  return est;
}

double combined_standard_error(const CostEstimate& a, const CostEstimate& b) {
  return std::hypot(a.standard_error, b.standard_error);
}

std::vector<double> tabulate_controls(const ControlLaw& control, const BrownianBundle& bundle) {
  const int steps = bundle.grid().steps();
  const int k = control.control_set().dimension();
  std::vector<double> table(static_cast<std::size_t>(bundle.paths()) * steps * k);
  parallel_chunks(static_cast<std::size_t>(bundle.paths()), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      for (int i = 0; i < steps; ++i) {
        Eigen::Map<Vec> out(table.data() + (m * steps + static_cast<std::size_t>(i)) * k, k);
        control.evaluate(i, bundle.path(static_cast<int>(m), i), out);
      }
    }
  });
  return table;
}

namespace {

void check_compatible(const ProblemSpec& spec, const ControlLaw& control, const BrownianBundle& bundle) {
  spec.dims.validate();
  if (bundle.dim() != spec.dims.d) throw ConfigError("Brownian bundle dimension does not match the problem's d");
  if (control.control_set().dimension() != spec.dims.k) {
    throw ConfigError("control law dimension does not match the problem's k");
  }
}

constexpr int kNewtonIterations = 50;

}  // namespace

Trajectory solve_bsde(const ProblemSpec& spec, const ControlLaw& control,
                      std::shared_ptr<const BrownianBundle> bundle, const RegressionConfig& config) {
  check_compatible(spec, control, *bundle);
  config.validate();
  const int n = spec.dims.n;
  const int d = spec.dims.d;
  const int k = spec.dims.k;
  const int M = bundle->paths();
  const int N = bundle->grid().steps();
  const double dt = bundle->grid().dt();

  Trajectory traj(bundle, n);
  const auto controls = tabulate_controls(control, *bundle);

  for (int m = 0; m < M; ++m) {
    auto yT = traj.y(m, N);
    spec.terminal_value(bundle->state(m, N), yT);
    if (!yT.allFinite()) throw DivergenceError("solve_bsde", N, m);
  }

  Mat features(M, d);
  Mat next(M, n);
  Mat mart(M, n * d);
  for (int i = N - 1; i >= 0; --i) {
    const double t = bundle->grid().node(i);
    for (int m = 0; m < M; ++m) {
      features.row(m) = bundle->state(m, i).transpose();
      next.row(m) = traj.y(m, i + 1).transpose();
    }
    const NodeRegression reg(features, config);
    const Mat yhat = reg.fitted(next);
    for (int m = 0; m < M; ++m) {
      const auto dw = bundle->increment(m, i);
      for (int l = 0; l < d; ++l) {
        for (int j = 0; j < n; ++j) mart(m, j + l * n) = (next(m, j) - yhat(m, j)) * dw[l] / dt;
      }
    }
    const Mat zfit = reg.fitted(mart);

    parallel_chunks(static_cast<std::size_t>(M), [&](std::size_t, std::size_t begin, std::size_t end) {
      Vec y(n), f(n), drift(n), step(n), target(n);
      Mat jac(n, n), by(n, n);
      Eigen::PartialPivLU<Mat> lu(n);
      for (std::size_t mm = begin; mm < end; ++mm) {
        const int m = static_cast<int>(mm);
        auto z = traj.z(m, i);
        for (int c = 0; c < n * d; ++c) z.data()[c] = zfit(m, c);
        const Eigen::Map<const Vec> v(controls.data() + (mm * N + static_cast<std::size_t>(i)) * k, k);
        target = yhat.row(m).transpose();
        const double scale = 1e-14 * (1.0 + target.cwiseAbs().maxCoeff());

        spec.drift(t, target, z, v, drift);
        y = target - drift * dt;
        bool converged = false;
        for (int it = 0; it < kNewtonIterations; ++it) {
          spec.drift(t, y, z, v, drift);
          f = y + drift * dt - target;
          if (!f.allFinite()) break;
          if (f.cwiseAbs().maxCoeff() <= scale) {
            converged = true;
            break;
          }
          spec.drift_dy(t, y, z, v, by);
          jac.setIdentity();
          jac += by * dt;
          if (n == 1) {
            y[0] -= f[0] / jac(0, 0);
          } else {
            lu.compute(jac);
            step = lu.solve(f);
            y -= step;
          }
        }
        if (!converged || !y.allFinite() || !z.allFinite()) throw DivergenceError("solve_bsde", i, m);
        traj.y(m, i) = y;
      }
    });
  }
  return traj;
}

CostEstimate evaluate_cost(const ProblemSpec& spec, const ControlLaw& control, const Trajectory& traj) {
  const auto& bundle = traj.bundle();
  check_compatible(spec, control, bundle);
  const int M = traj.paths();
  const int N = traj.steps();
  const int k = spec.dims.k;
  const double dt = traj.grid().dt();
  const auto controls = tabulate_controls(control, bundle);
  std::vector<double> samples(static_cast<std::size_t>(M));
  parallel_chunks(static_cast<std::size_t>(M), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t mm = begin; mm < end; ++mm) {
      const int m = static_cast<int>(mm);
      double running = 0.0;
      for (int i = 0; i < N; ++i) {
        const Eigen::Map<const Vec> v(controls.data() + (mm * N + static_cast<std::size_t>(i)) * k, k);
        running += spec.running_cost(traj.grid().node(i), traj.y(m, i), traj.z(m, i), v) * dt;
      }
      const double total = spec.terminal_cost(traj.y(m, 0)) + running;
      if (!std::isfinite(total)) throw DivergenceError("evaluate_cost", 0, m);
      samples[mm] = total;
    }
  });
  return CostEstimate::from_samples(std::move(samples));
}

}  // namespace bsmp
