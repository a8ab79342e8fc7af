#include "bsmp/relaxed.hpp"

#include "bsmp/errors.hpp"
#include "bsmp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace bsmp {

RelaxedControlLaw::RelaxedControlLaw(std::vector<Vec> atoms, Rule rule, std::string label, bool time_only)
    : atoms_(std::move(atoms)), rule_(std::move(rule)), label_(std::move(label)), time_only_(time_only) {
  if (atoms_.empty()) throw ConfigError("relaxed control needs at least one atom");
  for (const auto& a : atoms_)
    if (a.size() != atoms_.front().size()) throw ConfigError("relaxed control atoms differ in dimension");
}

void RelaxedControlLaw::weights(int node, const PathView& path, VecOut out) const {
  rule_(node, path, out);
  double sum = 0.0;
  for (Eigen::Index l = 0; l < out.size(); ++l) {
    if (!(out[l] >= 0.0)) throw ConfigError("relaxed control '" + label_ + "' produced a negative weight");
    sum += out[l];
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("relaxed control '" + label_ + "' weights do not sum to 1");
}

Vec RelaxedControlLaw::weights(int node, const PathView& path) const {
  Vec out(size());
  weights(node, path, out);
  return out;
}

ControlLaw RelaxedControlLaw::as_weight_law() const {
  return ControlLaw(
      ControlSet::simplex(size()), [self = *this](int node, const PathView& path, VecOut out) {
        self.weights(node, path, out);
      },
      label_, time_only_);
}

RelaxedControlLaw constant_relaxed(std::vector<Vec> atoms, Vec weights, std::string label) {
  if (weights.size() != static_cast<Eigen::Index>(atoms.size()))
    throw ConfigError("weight vector length does not match the atom count");
  if (label.empty()) {
    std::ostringstream os;
    os << "weights:";
    for (Eigen::Index l = 0; l < weights.size(); ++l) os << (l ? "," : "") << weights[l];
    label = os.str();
  }
  RelaxedControlLaw law(std::move(atoms), [weights](int, const PathView&, VecOut out) { out = weights; }, label,
                        true);
  law.weights(0, PathView::at_node(0, Vec::Zero(1)));  // validates the simplex constraint
  return law;
}

RelaxedControlLaw embed_strict(const ControlLaw& control, std::vector<Vec> atoms) {
  const auto probe = ControlSet::atoms(atoms);
  return RelaxedControlLaw(
      atoms,
      [control, probe](int node, const PathView& path, VecOut out) {
        const Vec v = control(node, path);
        const int idx = probe.atom_index(v);
        if (idx < 0) throw ConfigError("strict control value is not one of the relaxed atoms");
        out.setZero();
        out[idx] = 1.0;
      },
      "dirac(" + control.label() + ")", control.time_only());
}

ProblemSpec average_coefficients(const ProblemSpec& spec, const std::vector<Vec>& atoms) {
  if (atoms.empty()) throw ConfigError("averaging needs at least one atom");
  for (const auto& a : atoms)
    if (!spec.controls.contains(a)) throw ConfigError("relaxed atom is not in U");
  const int n = spec.dims.n;
  const int d = spec.dims.d;
  const int L = static_cast<int>(atoms.size());

  ProblemSpec out = spec;
  out.name = spec.name + "-relaxed";
  out.dims.k = L;
  out.controls = ControlSet::simplex(L);

  out.drift = [f = spec.drift, atoms, n](double t, CVecRef y, CMatRef z, CVecRef w, VecOut res) {
    res.setZero();
    thread_local Vec tmp;
    tmp.resize(n);
    for (std::size_t l = 0; l < atoms.size(); ++l) {
      f(t, y, z, atoms[l], tmp);
      res += w[static_cast<Eigen::Index>(l)] * tmp;
    }
  };
  auto average_matrix = [atoms](MatrixField f, int rows, int cols) -> MatrixField {
    return [f = std::move(f), atoms, rows, cols](double t, CVecRef y, CMatRef z, CVecRef w, MatOut res) {
      res.setZero();
      thread_local Mat tmp;
      tmp.resize(rows, cols);
      for (std::size_t l = 0; l < atoms.size(); ++l) {
        f(t, y, z, atoms[l], tmp);
        res += w[static_cast<Eigen::Index>(l)] * tmp;
      }
    };
  };
  out.drift_dy = average_matrix(spec.drift_dy, n, n);
  out.drift_dz = average_matrix(spec.drift_dz, n, n * d);
  out.running_cost_dz = average_matrix(spec.running_cost_dz, n, d);
  out.running_cost = [f = spec.running_cost, atoms](double t, CVecRef y, CMatRef z, CVecRef w) {
    double acc = 0.0;
    for (std::size_t l = 0; l < atoms.size(); ++l) acc += w[static_cast<Eigen::Index>(l)] * f(t, y, z, atoms[l]);
    return acc;
  };
  out.running_cost_dy = [f = spec.running_cost_dy, atoms, n](double t, CVecRef y, CMatRef z, CVecRef w,
                                                             VecOut res) {
    res.setZero();
    thread_local Vec tmp;
    tmp.resize(n);
    for (std::size_t l = 0; l < atoms.size(); ++l) {
      f(t, y, z, atoms[l], tmp);
      res += w[static_cast<Eigen::Index>(l)] * tmp;
    }
  };
  (void)L;
  return out;
}

Trajectory solve_relaxed_bsde(const ProblemSpec& spec, const RelaxedControlLaw& q,
                              std::shared_ptr<const BrownianBundle> bundle, const RegressionConfig& config) {
  return solve_bsde(average_coefficients(spec, q.atoms()), q.as_weight_law(), std::move(bundle), config);
}

CostEstimate relaxed_cost(const ProblemSpec& spec, const RelaxedControlLaw& q, const Trajectory& traj) {
  return evaluate_cost(average_coefficients(spec, q.atoms()), q.as_weight_law(), traj);
}

AdjointPath solve_relaxed_adjoint(const ProblemSpec& spec, const RelaxedControlLaw& q, const Trajectory& traj) {
  return solve_adjoint(average_coefficients(spec, q.atoms()), q.as_weight_law(), traj);
}

double relaxed_hamiltonian(const ProblemSpec& spec, double t, CVecRef y, CMatRef z, CVecRef p, CVecRef weights,
                           const std::vector<Vec>& atoms) {
  if (weights.size() != static_cast<Eigen::Index>(atoms.size()))
    throw ConfigError("weight vector length does not match the atom count");
  double acc = 0.0;
  for (std::size_t l = 0; l < atoms.size(); ++l)
    acc += weights[static_cast<Eigen::Index>(l)] * hamiltonian(spec, t, y, z, p, atoms[l]);
  return acc;
}

ChatteringSchedule chattering_sequence(const RelaxedControlLaw& q, int level, const TimeGrid& grid) {
  const int N = grid.steps();
  if (level < 1 || N % level != 0) {
    throw ConfigError("chattering level " + std::to_string(level) + " must divide the step count " +
                      std::to_string(N));
  }
  const int block = N / level;
  ControlLaw law(
      ControlSet::atoms(q.atoms()),
      [q, block](int node, const PathView& path, VecOut out) {
        const int first = node - node % block;
        const double s = static_cast<double>(node - first) / block;
        const Vec w = q.weights(first, path.until(first));
        double cumulative = 0.0;
        int chosen = -1;
        for (int l = 0; l < w.size(); ++l) {
          cumulative += w[l];
          if (cumulative > s) {
            chosen = l;
            break;
          }
        }
        if (chosen < 0) {  // rounding left the cumulative sum just below s
          for (int l = static_cast<int>(w.size()) - 1; l >= 0; --l)
            if (w[l] > 0.0) {
              chosen = l;
              break;
            }
        }
        out = q.atoms()[static_cast<std::size_t>(chosen)];
      },
      "chatter:" + std::to_string(level) + "(" + q.label() + ")", q.time_only());
  return {level, std::move(law)};
}

std::vector<StableRow> stable_convergence_diagnostic(const RelaxedControlLaw& q, const std::vector<int>& levels,
                                                     const std::vector<TestFunction>& functions,
                                                     const BrownianBundle& bundle) {
  if (levels.size() < 2) throw ConfigError("stable-convergence diagnostic needs at least two levels");
  if (functions.empty()) throw ConfigError("stable-convergence diagnostic needs a test function");
  const auto& grid = bundle.grid();
  const int N = grid.steps();
  const int M = bundle.paths();
  const double dt = grid.dt();
  const int L = q.size();
  std::vector<StableRow> rows;
  for (int level : levels) {
    const auto schedule = chattering_sequence(q, level, grid);
    for (std::size_t f = 0; f < functions.size(); ++f) {
      const auto& fn = functions[f];
      std::vector<double> per_path(static_cast<std::size_t>(M));
      parallel_chunks(static_cast<std::size_t>(M), [&](std::size_t, std::size_t begin, std::size_t end) {
        Vec w(L);
        for (std::size_t mm = begin; mm < end; ++mm) {
          const int m = static_cast<int>(mm);
          double running = 0.0, acc = 0.0;
          for (int i = 0; i < N; ++i) {
            const auto path = bundle.path(m, i);
            const double t = grid.node(i);
            q.weights(i, path, w);
            double average = 0.0;
            for (int l = 0; l < L; ++l) average += w[l] * fn(t, q.atoms()[static_cast<std::size_t>(l)]);
            running += (fn(t, schedule.law(i, path)) - average) * dt;
            acc += std::abs(running) * dt;
          }
          per_path[mm] = acc / grid.horizon();
        }
      });
      double sum = 0.0;
      for (double v : per_path) sum += v;
      rows.push_back({level, static_cast<int>(f), sum / M});
    }
  }
  return rows;
}

ChatteringStudy chattering_convergence_study(const ProblemSpec& spec, const RelaxedControlLaw& q,
                                             const std::vector<int>& levels,
                                             std::shared_ptr<const BrownianBundle> bundle,
                                             const RegressionConfig& config) {
  const auto& grid = bundle->grid();
  const int N = grid.steps();
  const int M = bundle->paths();
  const double dt = grid.dt();
  const auto avg = average_coefficients(spec, q.atoms());
  const auto weight_law = q.as_weight_law();
  const auto relaxed_traj = solve_bsde(avg, weight_law, bundle, config);
  const auto relaxed_adj = solve_adjoint(avg, weight_law, relaxed_traj);
  const auto weights = tabulate_controls(weight_law, *bundle);
  const int L = q.size();

  ChatteringStudy study;
  study.relaxed = evaluate_cost(avg, weight_law, relaxed_traj);
  for (int level : levels) {
    const auto schedule = chattering_sequence(q, level, grid);
    const auto traj = solve_bsde(spec, schedule.law, bundle, config);
    const auto cost = evaluate_cost(spec, schedule.law, traj);
    const auto adj = solve_adjoint(spec, schedule.law, traj);
    const auto controls = tabulate_controls(schedule.law, *bundle);
    const int k = spec.dims.k;

    constexpr int kColumns = 7;
    std::vector<double> per_path(static_cast<std::size_t>(M) * kColumns, 0.0);
    parallel_chunks(static_cast<std::size_t>(M), [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t mm = begin; mm < end; ++mm) {
        const int m = static_cast<int>(mm);
        double* acc = per_path.data() + mm * kColumns;
        for (int i = 0; i <= N; ++i) {
          acc[0] = std::max(acc[0], (traj.y(m, i) - relaxed_traj.y(m, i)).squaredNorm());
          acc[2] = std::max(acc[2], (adj.p(m, i) - relaxed_adj.p(m, i)).squaredNorm());
          if (i == N) break;
          acc[1] += (traj.z(m, i) - relaxed_traj.z(m, i)).squaredNorm() * dt;
          const double t = grid.node(i);
          const Eigen::Map<const Vec> u(controls.data() + (mm * N + static_cast<std::size_t>(i)) * k, k);
          const Eigen::Map<const Vec> w(weights.data() + (mm * N + static_cast<std::size_t>(i)) * L, L);
          const auto &ys = traj.y(m, i), &yr = relaxed_traj.y(m, i);
          const auto &zs = traj.z(m, i), &zr = relaxed_traj.z(m, i);
          acc[3] += (spec.b_y(t, ys, zs, u) - avg.b_y(t, yr, zr, w)).squaredNorm() * dt;
          acc[4] += (spec.b_z(t, ys, zs, u) - avg.b_z(t, yr, zr, w)).squaredNorm() * dt;
          acc[5] += (spec.h_y(t, ys, zs, u) - avg.h_y(t, yr, zr, w)).squaredNorm() * dt;
          acc[6] += (spec.h_z(t, ys, zs, u) - avg.h_z(t, yr, zr, w)).squaredNorm() * dt;
        }
      }
    });
    double sums[kColumns] = {};
    for (int m = 0; m < M; ++m)
      for (int c = 0; c < kColumns; ++c) sums[c] += per_path[static_cast<std::size_t>(m) * kColumns + c];
    ChatteringRow row;
    row.level = level;
    row.y_moment = sums[0] / M;
    row.z_moment = sums[1] / M;
    row.p_moment = sums[2] / M;
    row.b_y_gap = sums[3] / M;
    row.b_z_gap = sums[4] / M;
    row.h_y_gap = sums[5] / M;
    row.h_z_gap = sums[6] / M;
    row.strict_cost = cost.value;
    row.strict_cost_stderr = cost.standard_error;
    row.cost_gap = std::abs(cost.value - study.relaxed.value);
    study.rows.push_back(row);
  }
  return study;
}

NearOptimalityReport near_optimality_check(const ProblemSpec& spec, const RelaxedControlLaw& q,
                                           const std::vector<int>& levels,
                                           std::shared_ptr<const BrownianBundle> bundle,
                                           const RegressionConfig& config, const std::vector<Vec>& candidates) {
  const auto& grid = bundle->grid();
  const auto relaxed_traj = solve_relaxed_bsde(spec, q, bundle, config);
  const auto relaxed = relaxed_cost(spec, q, relaxed_traj);

  NearOptimalityReport report;
  for (int level : levels) {
    const auto schedule = chattering_sequence(q, level, grid);
    const auto traj = solve_bsde(spec, schedule.law, bundle, config);
    const auto cost = evaluate_cost(spec, schedule.law, traj);
    const auto adj = solve_adjoint(spec, schedule.law, traj);

    std::vector<double> diff(cost.samples.size());
    for (std::size_t m = 0; m < diff.size(); ++m) diff[m] = cost.samples[m] - relaxed.samples[m];
    const auto paired = CostEstimate::from_samples(std::move(diff));

    NearOptimalityLevel entry;
    entry.level = level;
    entry.epsilon_raw = paired.value;
    entry.epsilon_stderr = paired.standard_error;
    entry.clamped = paired.value <= paired.standard_error;
    entry.epsilon = entry.clamped ? 0.0 : paired.value;
    entry.gaps = check_necessary(spec, schedule.law, traj, adj, candidates);
    entry.ratio = entry.epsilon > 0.0 ? entry.gaps.max_gap / entry.epsilon : std::nan("");
    report.levels.push_back(std::move(entry));
  }
  report.epsilon_decreasing = true;
  report.gap_decreasing = true;
  double lo = INFINITY, hi = 0.0;
  for (std::size_t j = 0; j < report.levels.size(); ++j) {
    const auto& e = report.levels[j];
    if (j > 0) {
      const auto& prev = report.levels[j - 1];
      report.epsilon_decreasing = report.epsilon_decreasing && e.epsilon < prev.epsilon;
      report.gap_decreasing = report.gap_decreasing && e.gaps.mean_gap < prev.gaps.mean_gap &&
                              e.gaps.max_gap < prev.gaps.max_gap;
    }
    if (e.epsilon > e.epsilon_stderr && e.epsilon > 0.0) {
      lo = std::min(lo, e.ratio);
      hi = std::max(hi, e.ratio);
    }
  }
  report.ratio_spread = hi > 0.0 ? hi / lo : 1.0;
  report.ratio_bounded = report.ratio_spread <= 10.0;
  return report;
}

ViolationReport check_relaxed_necessary(const ProblemSpec& spec, const RelaxedControlLaw& q, const Trajectory& traj,
                                        const AdjointPath& adjoint, const std::vector<Vec>& candidates,
                                        const CheckOptions& options) {
  if (candidates.empty()) throw ConfigError("maximum-condition check needs a nonempty U grid");
  if (&traj.bundle() != &adjoint.bundle()) throw ConfigError("trajectory and adjoint use different bundles");
  const auto& bundle = traj.bundle();
  const auto& grid = bundle.grid();
  const int N = grid.steps();
  const int M = bundle.paths();
  const int B = options.blocks;
  if (B < 0 || (B > 0 && N % B != 0)) throw ConfigError("block count must divide the number of steps");
  const int units = B > 0 ? B : N;
  const int per_unit = N / units;
  const int L = q.size();
  const std::size_t A = candidates.size();
  const double support_tol = options.tolerance >= 0.0 ? std::max(options.tolerance, 1e-12) : 1e-3;
  const auto weights = tabulate_controls(q.as_weight_law(), bundle);

  std::vector<double> gaps(static_cast<std::size_t>(M) * units);
  std::vector<int> argmax(gaps.size());
  std::vector<double> support(static_cast<std::size_t>(M), 0.0);
  parallel_chunks(static_cast<std::size_t>(M), [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<double> cand(A), atom_h(static_cast<std::size_t>(L));
    for (std::size_t mm = begin; mm < end; ++mm) {
      const int m = static_cast<int>(mm);
      double mass = 0.0;
      for (int u = 0; u < units; ++u) {
        std::fill(cand.begin(), cand.end(), 0.0);
        double ref = 0.0;
        for (int i = u * per_unit; i < (u + 1) * per_unit; ++i) {
          const double t = grid.node(i);
          const auto y = traj.y(m, i);
          const auto z = traj.z(m, i);
          const auto p = adjoint.p(m, i);
          const Eigen::Map<const Vec> w(weights.data() + (mm * N + static_cast<std::size_t>(i)) * L, L);
          double node_max = -INFINITY;
          for (std::size_t a = 0; a < A; ++a) {
            const double h = hamiltonian(spec, t, y, z, p, candidates[a]);
            cand[a] += h;
            node_max = std::max(node_max, h);
          }
          for (int l = 0; l < L; ++l) {
            atom_h[static_cast<std::size_t>(l)] = hamiltonian(spec, t, y, z, p, q.atoms()[static_cast<std::size_t>(l)]);
            ref += w[l] * atom_h[static_cast<std::size_t>(l)];
            node_max = std::max(node_max, atom_h[static_cast<std::size_t>(l)]);
          }
          for (int l = 0; l < L; ++l)
            if (atom_h[static_cast<std::size_t>(l)] >= node_max - support_tol) mass += w[l];
        }
        std::size_t best = 0;
        for (std::size_t a = 1; a < A; ++a)
          if (cand[a] > cand[best]) best = a;
        const std::size_t idx = mm * units + static_cast<std::size_t>(u);
        gaps[idx] = std::max(0.0, (cand[best] - ref) / per_unit);
        argmax[idx] = static_cast<int>(best);
      }
      support[mm] = mass / N;
    }
  });
  auto report = summarize_gaps(gaps, argmax, M, units, options);
  double mass = 0.0;
  for (double s : support) mass += s;
  report.support_mass = mass / M;
  return report;
}

SufficiencyReport check_relaxed_sufficient(const ProblemSpec& spec, const std::vector<Vec>& atoms, int samples,
                                           std::uint64_t seed) {
  if (samples < 1) throw ConfigError("sufficiency check needs at least one sample");
  const auto points = sample_points(spec, 2 * samples, seed);
  std::mt19937_64 rng(mix_seed(seed, 0x7e1a));
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> pdist(-2.0, 2.0);
  const int L = static_cast<int>(atoms.size());
  auto random_weights = [&] {
    Vec w(L);
    for (auto& x : w) x = expo(rng);
    return Vec(w / w.sum());
  };

  SufficiencyReport r;
  r.samples = samples;
  r.convexity_defect = -INFINITY;
  r.concavity_defect = -INFINITY;
  r.linearity_defect = 0.0;
  r.control_set_convex = true;  // the set of probability weights is convex
  for (int s = 0; s < samples; ++s) {
    const auto& a = points[static_cast<std::size_t>(2 * s)];
    const auto& b = points[static_cast<std::size_t>(2 * s + 1)];
    Vec p(spec.dims.n);
    for (auto& x : p) x = pdist(rng);
    const double t = a.t;

    const Vec w1 = random_weights();
    const Vec w2 = random_weights();
    const double alpha = unit(rng);
    const Vec w3 = alpha * w1 + (1.0 - alpha) * w2;
    const double lhs = relaxed_hamiltonian(spec, t, a.y, a.z, p, w3, atoms);
    const double rhs = alpha * relaxed_hamiltonian(spec, t, a.y, a.z, p, w1, atoms) +
                       (1.0 - alpha) * relaxed_hamiltonian(spec, t, a.y, a.z, p, w2, atoms);
    r.linearity_defect = std::max(r.linearity_defect, std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)}));

    const Vec ym = 0.5 * (a.y + b.y);
    const Mat zm = 0.5 * (a.z + b.z);
    const double mean_h = 0.5 * (relaxed_hamiltonian(spec, t, a.y, a.z, p, w1, atoms) +
                                 relaxed_hamiltonian(spec, t, b.y, b.z, p, w1, atoms));
    r.concavity_defect = std::max(r.concavity_defect, mean_h - relaxed_hamiltonian(spec, t, ym, zm, p, w1, atoms));
    r.convexity_defect = std::max(r.convexity_defect, spec.g(ym) - 0.5 * (spec.g(a.y) + spec.g(b.y)));
  }
  r.pass = r.linearity_defect <= 1e-12 && r.concavity_defect <= 1e-9 && r.convexity_defect <= 1e-9;
  return r;
}

}  // namespace bsmp
