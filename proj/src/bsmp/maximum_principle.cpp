#include "bsmp/maximum_principle.hpp"

#include "bsmp/errors.hpp"
#include "bsmp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace bsmp {

ControlLaw spike_perturb(const ControlLaw& control, const SpikeSpec& spike, const TimeGrid& grid) {
  const double T = grid.horizon();
  if (!(spike.tau >= 0.0 && spike.tau < T)) throw ConfigError("spike start must lie in [0, T)");
  if (!(spike.width > 0.0)) throw ConfigError("spike width must be positive");
  if (spike.tau + spike.width > T * (1.0 + 1e-12)) throw ConfigError("spike must end by the horizon");
  if (!control.control_set().contains(spike.value)) throw ConfigError("spike value is not in U");

  const double eps = 1e-9 * grid.dt();
  std::vector<char> inside(static_cast<std::size_t>(grid.steps()), 0);
  for (int i = 0; i < grid.steps(); ++i) {
    const double t = grid.node(i);
    inside[static_cast<std::size_t>(i)] = t >= spike.tau - eps && t < spike.tau + spike.width - eps;
  }
  std::ostringstream label;
  label << "spike(" << control.label() << "; tau=" << spike.tau << ", width=" << spike.width << ", v="
        << spike.value.transpose() << ")";
  return ControlLaw(
      control.control_set(),
      [base = control, inside, value = spike.value](int node, const PathView& path, VecOut out) {
        if (inside[static_cast<std::size_t>(node)]) {
          out = value;
        } else {
          base.evaluate(node, path, out);
        }
      },
      label.str(), control.time_only());
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("slope fit needs at least two points");
  double sx = 0.0, sy = 0.0;
  const double k = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::nan("");
    sx += std::log(x[i]);
    sy += std::log(y[i]);
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - sx / k;
    sxy += dx * (std::log(y[i]) - sy / k);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

SpikeStudy spike_convergence_study(const ProblemSpec& spec, const ControlLaw& control, double tau,
                                   const Vec& value, const std::vector<double>& widths,
                                   std::shared_ptr<const BrownianBundle> bundle, const RegressionConfig& config) {
  if (widths.size() < 3) throw ConfigError("spike study needs at least three widths");
  const auto& grid = bundle->grid();
  const double dt = grid.dt();
  for (double w : widths) {
    const double r = w / dt;
    if (!(r >= 1.0 - 1e-9) || std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) {
      std::ostringstream os;
      os << "spike width " << w << " is not a positive multiple of dt = " << dt;
      throw ConfigError(os.str());
    }
  }
  const auto aug = augment_problem(spec);
  const auto base = solve_bsde(aug.spec, control, bundle, config);
  const int M = bundle->paths();
  const int N = grid.steps();

  SpikeStudy study;
  for (double w : widths) {
    const auto law = spike_perturb(control, SpikeSpec{tau, w, value}, grid);
    const auto pert = solve_bsde(aug.spec, law, bundle, config);
    std::vector<double> ysup(static_cast<std::size_t>(M)), zint(static_cast<std::size_t>(M));
    parallel_chunks(static_cast<std::size_t>(M), [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t mm = begin; mm < end; ++mm) {
        const int m = static_cast<int>(mm);
        double sup = 0.0, acc = 0.0;
        for (int i = 0; i <= N; ++i) {
          sup = std::max(sup, (pert.y(m, i) - base.y(m, i)).squaredNorm());
          if (i < N) acc += (pert.z(m, i) - base.z(m, i)).squaredNorm() * dt;
        }
        ysup[mm] = sup;
        zint[mm] = acc;
      }
    });
    SpikeRow row;
    row.width = w;
    for (int m = 0; m < M; ++m) {
      row.y_moment += ysup[static_cast<std::size_t>(m)];
      row.z_moment += zint[static_cast<std::size_t>(m)];
    }
    row.y_moment /= M;
    row.z_moment /= M;
    study.rows.push_back(row);
  }
  std::vector<double> xs, ys, zs;
  for (const auto& r : study.rows) {
    xs.push_back(r.width);
    ys.push_back(r.y_moment);
    zs.push_back(r.z_moment);
  }
  study.y_slope = log_log_slope(xs, ys);
  study.z_slope = log_log_slope(xs, zs);
  return study;
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

}  // namespace

ViolationReport summarize_gaps(const std::vector<double>& gaps, const std::vector<int>& argmax, int paths,
                               int units, const CheckOptions& options) {
  ViolationReport r;
  r.blocks = options.blocks;
  r.samples = gaps.size();
  if (gaps.empty()) {
    r.tolerance = options.tolerance >= 0.0 ? options.tolerance : 1e-3;
    r.pass = true;
    return r;
  }
  double total = 0.0;
  std::vector<double> per_path(static_cast<std::size_t>(paths), 0.0);
  r.worst_per_node.assign(static_cast<std::size_t>(units), Offender{});
  for (int u = 0; u < units; ++u) r.worst_per_node[static_cast<std::size_t>(u)].node = u;
  for (int m = 0; m < paths; ++m) {
    double acc = 0.0;
    for (int u = 0; u < units; ++u) {
      const std::size_t idx = static_cast<std::size_t>(m) * units + static_cast<std::size_t>(u);
      const double g = gaps[idx];
      acc += g;
      r.max_gap = std::max(r.max_gap, g);
      auto& worst = r.worst_per_node[static_cast<std::size_t>(u)];
      if (g > worst.gap || m == 0) worst = Offender{u, m, argmax[idx], g};
    }
    per_path[static_cast<std::size_t>(m)] = acc / units;
    total += acc;
  }
  r.mean_gap = total / static_cast<double>(gaps.size());
  if (paths > 1) {
    double sq = 0.0;
    for (double v : per_path) sq += (v - r.mean_gap) * (v - r.mean_gap);
    r.gap_stderr = std::sqrt(sq / (paths - 1) / paths);
  }
  std::vector<double> sorted = gaps;
  std::sort(sorted.begin(), sorted.end());
  r.q50 = quantile(sorted, 0.50);
  r.q90 = quantile(sorted, 0.90);
  r.q99 = quantile(sorted, 0.99);
  r.tolerance = options.tolerance >= 0.0 ? options.tolerance : std::max(1e-3, 3.0 * r.gap_stderr);
  r.pass = r.mean_gap <= r.tolerance && r.q99 <= 3.0 * r.tolerance;
  return r;
}

ViolationReport check_necessary(const ProblemSpec& spec, const ControlLaw& control, const Trajectory& traj,
                                const AdjointPath& adjoint, const std::vector<Vec>& candidates,
                                const CheckOptions& options) {
  if (candidates.empty()) throw ConfigError("maximum-condition check needs a nonempty U grid");
  if (&traj.bundle() != &adjoint.bundle()) throw ConfigError("trajectory and adjoint use different bundles");
  const auto& bundle = traj.bundle();
  const auto& grid = bundle.grid();
  const int N = grid.steps();
  const int M = bundle.paths();
  const int k = spec.dims.k;
  const int B = options.blocks;
  if (B < 0 || (B > 0 && N % B != 0)) throw ConfigError("block count must divide the number of steps");
  const int units = B > 0 ? B : N;
  const int per_unit = N / units;
  const auto controls = tabulate_controls(control, bundle);
  const std::size_t A = candidates.size();

  std::vector<double> gaps(static_cast<std::size_t>(M) * units);
  std::vector<int> argmax(gaps.size());
  parallel_chunks(static_cast<std::size_t>(M), [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<double> cand(A);
    for (std::size_t mm = begin; mm < end; ++mm) {
      const int m = static_cast<int>(mm);
      for (int u = 0; u < units; ++u) {
        std::fill(cand.begin(), cand.end(), 0.0);
        double ref = 0.0;
        for (int i = u * per_unit; i < (u + 1) * per_unit; ++i) {
          const double t = grid.node(i);
          const auto y = traj.y(m, i);
          const auto z = traj.z(m, i);
          const auto p = adjoint.p(m, i);
          const Eigen::Map<const Vec> v(controls.data() + (mm * N + static_cast<std::size_t>(i)) * k, k);
          ref += hamiltonian(spec, t, y, z, p, v);
          for (std::size_t a = 0; a < A; ++a) cand[a] += hamiltonian(spec, t, y, z, p, candidates[a]);
        }
        std::size_t best = 0;
        for (std::size_t a = 1; a < A; ++a)
          if (cand[a] > cand[best]) best = a;
        const std::size_t idx = mm * units + static_cast<std::size_t>(u);
        // Block averages can favour a control that varies inside the block; clamp at 0.
        gaps[idx] = std::max(0.0, (cand[best] - ref) / per_unit);
        argmax[idx] = static_cast<int>(best);
      }
    }
  });
  return summarize_gaps(gaps, argmax, M, units, options);
}

SufficiencyReport check_sufficient_assumptions(const ProblemSpec& spec, int samples, std::uint64_t seed,
                                               double p_low, double p_high) {
  if (samples < 1) throw ConfigError("sufficiency check needs at least one sample");
  const auto points = sample_points(spec, 2 * samples, seed);
  std::mt19937_64 rng(mix_seed(seed, 0x5eed));
  std::uniform_real_distribution<double> pdist(p_low, p_high);
  SufficiencyReport r;
  r.samples = samples;
  r.convexity_defect = -INFINITY;
  r.concavity_defect = -INFINITY;
  for (int s = 0; s < samples; ++s) {
    const auto& a = points[static_cast<std::size_t>(2 * s)];
    const auto& b = points[static_cast<std::size_t>(2 * s + 1)];
    const Vec ym = 0.5 * (a.y + b.y);
    const Mat zm = 0.5 * (a.z + b.z);
    const Vec vm = 0.5 * (a.v + b.v);
    r.convexity_defect = std::max(r.convexity_defect, spec.g(ym) - 0.5 * (spec.g(a.y) + spec.g(b.y)));
    Vec p(spec.dims.n);
    for (auto& x : p) x = pdist(rng);
    const double t = a.t;
    const double mean_h = 0.5 * (hamiltonian(spec, t, a.y, a.z, p, a.v) + hamiltonian(spec, t, b.y, b.z, p, b.v));
    r.concavity_defect = std::max(r.concavity_defect, mean_h - hamiltonian(spec, t, ym, zm, p, vm));
  }
  r.control_set_convex = spec.controls.convex();
  r.pass = r.convexity_defect <= 1e-9 && r.concavity_defect <= 1e-9;
  return r;
}

std::size_t control_mismatch_count(const ControlLaw& u, const ControlLaw& v, const BrownianBundle& bundle) {
  const int k = u.control_set().dimension();
  if (v.control_set().dimension() != k) throw ConfigError("control laws have different dimensions");
  const auto a = tabulate_controls(u, bundle);
  const auto b = tabulate_controls(v, bundle);
  std::size_t count = 0;
  const std::size_t cells = a.size() / static_cast<std::size_t>(k);
  for (std::size_t c = 0; c < cells; ++c) {
    for (int j = 0; j < k; ++j) {
      if (a[c * k + j] != b[c * k + j]) {
        ++count;
        break;
      }
    }
  }
  return count;
}

double control_distance(const ControlLaw& u, const ControlLaw& v, const BrownianBundle& bundle) {
  const auto count = static_cast<double>(control_mismatch_count(u, v, bundle));
  const auto& grid = bundle.grid();
  return count * grid.horizon() / (static_cast<double>(grid.steps()) * bundle.paths());
}

// ---------------------------------------------------------------------------
// Hamiltonian ascent.

namespace {

/// Regressions of (y, z, p) on W_{t_i} at every node, used to turn pathwise
/// argmax decisions into a feedback law on W.
struct NodeFits {
  std::vector<std::shared_ptr<NodeRegression>> regressions;
  std::vector<Mat> coefficients;  ///< basis x (n + n*d + n)
};

NodeFits fit_nodes(const Trajectory& traj, const AdjointPath& adj, const RegressionConfig& config) {
  const auto& bundle = traj.bundle();
  const int N = bundle.grid().steps();
  const int M = bundle.paths();
  const int n = traj.n();
  const int d = traj.d();
  const int q = 2 * n + n * d;
  NodeFits fits;
  for (int i = 0; i < N; ++i) {
    Mat features(M, d), targets(M, q);
    for (int m = 0; m < M; ++m) {
      features.row(m) = bundle.state(m, i).transpose();
      targets.row(m).head(n) = traj.y(m, i).transpose();
      targets.row(m).segment(n, n * d) = Eigen::Map<const Vec>(traj.z(m, i).data(), n * d).transpose();
      targets.row(m).tail(n) = adj.p(m, i).transpose();
    }
    auto reg = std::make_shared<NodeRegression>(features, config);
    fits.coefficients.push_back(reg->coefficients(targets));
    fits.regressions.push_back(std::move(reg));
  }
  return fits;
}

ControlLaw argmax_law(const ProblemSpec& spec, const TimeGrid& grid, std::shared_ptr<const NodeFits> fits,
                      const std::vector<Vec>& candidates, double tie_tolerance, std::string label) {
  const int n = spec.dims.n;
  const int d = spec.dims.d;
  return ControlLaw(
      spec.controls,
      [spec, grid, fits, candidates, tie_tolerance, n, d](int node, const PathView& path, VecOut out) {
        const auto& reg = *fits->regressions[static_cast<std::size_t>(node)];
        const Vec fitted = reg.evaluate(path.current(), fits->coefficients[static_cast<std::size_t>(node)]);
        const Vec y = fitted.head(n);
        const Mat z = Eigen::Map<const Mat>(fitted.data() + n, n, d);
        const Vec p = fitted.tail(n);
        const double t = grid.node(node);
        std::vector<double> values(candidates.size());
        double best = -INFINITY;
        for (std::size_t a = 0; a < candidates.size(); ++a) {
          values[a] = hamiltonian(spec, t, y, z, p, candidates[a]);
          best = std::max(best, values[a]);
        }
        const double floor = best - tie_tolerance * (1.0 + std::abs(best));
        for (std::size_t a = 0; a < candidates.size(); ++a) {
          if (values[a] >= floor) {
            out = candidates[a];
            return;
          }
        }
      },
      std::move(label), false);
}

/// Mean over paths of the pointwise Hamiltonian gap at each node.
std::vector<double> mean_gap_per_node(const ProblemSpec& spec, const ControlLaw& control, const Trajectory& traj,
                                      const AdjointPath& adj, const std::vector<Vec>& candidates) {
  const auto& bundle = traj.bundle();
  const auto& grid = bundle.grid();
  const int N = grid.steps();
  const int M = bundle.paths();
  const int k = spec.dims.k;
  const auto controls = tabulate_controls(control, bundle);
  std::vector<double> out(static_cast<std::size_t>(N), 0.0);
  for (int i = 0; i < N; ++i) {
    double acc = 0.0;
    for (int m = 0; m < M; ++m) {
      const Eigen::Map<const Vec> v(controls.data() + (static_cast<std::size_t>(m) * N + i) * k, k);
      const double ref = hamiltonian(spec, grid.node(i), traj.y(m, i), traj.z(m, i), adj.p(m, i), v);
      double best = -INFINITY;
      for (const auto& a : candidates)
        best = std::max(best, hamiltonian(spec, grid.node(i), traj.y(m, i), traj.z(m, i), adj.p(m, i), a));
      acc += best - ref;
    }
    out[static_cast<std::size_t>(i)] = acc / M;
  }
  return out;
}

ControlLaw splice_law(const ControlLaw& proposal, const ControlLaw& current, std::vector<char> use_proposal,
                      std::string label) {
  return ControlLaw(
      current.control_set(),
      [proposal, current, use_proposal = std::move(use_proposal)](int node, const PathView& path, VecOut out) {
        if (use_proposal[static_cast<std::size_t>(node)]) {
          proposal.evaluate(node, path, out);
        } else {
          current.evaluate(node, path, out);
        }
      },
      std::move(label), proposal.time_only() && current.time_only());
}

}  // namespace

AscentResult improve_by_hamiltonian_ascent(const ProblemSpec& spec, const ControlLaw& initial,
                                           std::shared_ptr<const BrownianBundle> bundle,
                                           const RegressionConfig& config, const AscentOptions& options) {
  if (options.iterations < 0) throw ConfigError("iteration count must be nonnegative");
  const auto candidates = spec.controls.grid(options.resolution);
  const auto& grid = bundle->grid();
  const int N = grid.steps();

  AscentResult result;
  auto evaluate = [&](const ControlLaw& law, Trajectory* keep) {
    auto traj = solve_bsde(spec, law, bundle, config);
    auto cost = evaluate_cost(spec, law, traj);
    if (keep) *keep = std::move(traj);
    return cost;
  };

  Trajectory traj(bundle, spec.dims.n);
  result.controls.push_back(initial);
  result.costs.push_back(evaluate(initial, &traj));
  if (candidates.size() == 1) {
    result.converged = true;
    return result;
  }

  for (int it = 0; it < options.iterations; ++it) {
    const ControlLaw& current = result.controls.back();
    const double current_cost = result.costs.back().value;
    const auto adj = solve_adjoint(spec, current, traj);
    auto fits = std::make_shared<const NodeFits>(fit_nodes(traj, adj, config));
    const auto proposal = argmax_law(spec, grid, fits, candidates, options.tie_tolerance,
                                     "ascent:" + std::to_string(it + 1));
    const double full_distance = control_distance(proposal, current, *bundle);
    if (full_distance == 0.0) {
      result.distances.push_back(0.0);
      result.controls.push_back(current);
      result.costs.push_back(result.costs.back());
      result.converged = true;
      break;
    }

    const double improvement_floor = current_cost - 1e-12 * (1.0 + std::abs(current_cost));
    Trajectory next_traj(bundle, spec.dims.n);
    auto cost = evaluate(proposal, &next_traj);
    std::optional<ControlLaw> accepted;
    if (cost.value < improvement_floor) {
      accepted = proposal;
    } else {
      // Confine the update to the nodes with the largest mean gap.
      const auto node_gap = mean_gap_per_node(spec, current, traj, adj, candidates);
      std::vector<int> order(static_cast<std::size_t>(N));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return node_gap[static_cast<std::size_t>(a)] > node_gap[static_cast<std::size_t>(b)];
      });
      for (int keep = N / 2; keep >= 1 && !accepted; keep /= 2) {
        std::vector<char> mask(static_cast<std::size_t>(N), 0);
        for (int j = 0; j < keep; ++j) mask[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = 1;
        auto partial = splice_law(proposal, current, std::move(mask),
                                  "ascent:" + std::to_string(it + 1) + "/top" + std::to_string(keep));
        cost = evaluate(partial, &next_traj);
        if (cost.value < improvement_floor) accepted = partial;
      }
    }
    if (!accepted) {
      result.warnings.push_back("iteration " + std::to_string(it + 1) +
                                ": no argmax update lowers the cost; stopping");
      break;
    }
    result.distances.push_back(control_distance(*accepted, current, *bundle));
    if (result.controls.size() >= 2 &&
        control_distance(*accepted, result.controls[result.controls.size() - 2], *bundle) == 0.0) {
      result.warnings.push_back("iteration " + std::to_string(it + 1) + ": period-2 cycle detected");
    }
    result.controls.push_back(*accepted);
    result.costs.push_back(cost);
    traj = std::move(next_traj);
  }
  return result;
}

}  // namespace bsmp
