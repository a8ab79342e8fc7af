#include "bsmp/problems.hpp"

#include "bsmp/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <random>

namespace bsmp {

namespace {

using Scalar4 = std::function<double(double t, double y, double z, double v)>;

/// Scalar problem (n = d = k = 1) from plain functions of (t, y, z, v).
struct ScalarCoefficients {
  Scalar4 b, b_y, b_z, h, h_y, h_z;
  std::function<double(double)> g, g_y, xi;
};

ProblemSpec scalar_spec(std::string name, ScalarCoefficients c, ControlSet controls) {
  ProblemSpec spec;
  spec.name = std::move(name);
  spec.dims = {1, 1, 1};
  spec.controls = std::move(controls);
  spec.drift = [f = c.b](double t, CVecRef y, CMatRef z, CVecRef v, VecOut out) {
    out[0] = f(t, y[0], z(0, 0), v[0]);
  };
  spec.drift_dy = [f = c.b_y](double t, CVecRef y, CMatRef z, CVecRef v, MatOut out) {
    out(0, 0) = f(t, y[0], z(0, 0), v[0]);
  };
  spec.drift_dz = [f = c.b_z](double t, CVecRef y, CMatRef z, CVecRef v, MatOut out) {
    out(0, 0) = f(t, y[0], z(0, 0), v[0]);
  };
  spec.running_cost = [f = c.h](double t, CVecRef y, CMatRef z, CVecRef v) {
    return f(t, y[0], z(0, 0), v[0]);
  };
  spec.running_cost_dy = [f = c.h_y](double t, CVecRef y, CMatRef z, CVecRef v, VecOut out) {
    out[0] = f(t, y[0], z(0, 0), v[0]);
  };
  spec.running_cost_dz = [f = c.h_z](double t, CVecRef y, CMatRef z, CVecRef v, MatOut out) {
    out(0, 0) = f(t, y[0], z(0, 0), v[0]);
  };
  spec.terminal_cost = [f = c.g](CVecRef y) { return f(y[0]); };
  spec.terminal_cost_dy = [f = c.g_y](CVecRef y, VecOut out) { out[0] = f(y[0]); };
  spec.terminal_value = [f = c.xi](CVecRef w, VecOut out) { out[0] = f(w[0]); };
  return spec;
}

const Scalar4 kZero = [](double, double, double, double) { return 0.0; };
const Scalar4 kControl = [](double, double, double, double v) { return v; };
const Scalar4 kOne = [](double, double, double, double) { return 1.0; };
const Scalar4 kSquare = [](double, double y, double, double) { return y * y; };
const Scalar4 kTwiceY = [](double, double y, double, double) { return 2.0 * y; };

Vec scalar(double x) { return Vec::Constant(1, x); }

ControlSet scalar_atoms(std::initializer_list<double> values) {
  std::vector<Vec> atoms;
  for (double v : values) atoms.push_back(scalar(v));
  return ControlSet::atoms(std::move(atoms));
}

}  // namespace

std::vector<std::string> problem_names() { return {"P0", "P1", "P2", "P3a", "P3b"}; }

BuiltinProblem get_problem(const std::string& name) {
  BuiltinProblem p;
  p.name = name;
  if (name == "P0") {
    p.title = "deterministic tradeoff";
    ScalarCoefficients c{kControl, kZero, kZero, kSquare, kTwiceY, kZero,
                         [](double y) { return (y - 1.0) * (y - 1.0); },
                         [](double y) { return 2.0 * (y - 1.0); }, [](double) { return 0.0; }};
    p.spec = scalar_spec(name, c, ControlSet::box(scalar(-1.0), scalar(1.0), 21));
    p.builtin_control = scalar(0.0);
    p.oracle = OracleParams{2, 41, 512, 1.0};
    p.oracle_note = "enumeration over piecewise-constant controls";
  } else if (name == "P1") {
    p.title = "stochastic spike testbed";
    ScalarCoefficients c{kControl, kZero, kZero, kSquare, kTwiceY, kZero,
                         [](double y) { return y * y; }, [](double y) { return 2.0 * y; },
                         [](double w) { return w; }};
    p.spec = scalar_spec(name, c, scalar_atoms({-1.0, 0.0, 1.0}));
    p.builtin_control = scalar(0.0);
    p.oracle_note = "z = 1 for state-independent controls";
  } else if (name == "P2") {
    p.title = "chattering gap";
    ScalarCoefficients c{kControl, kZero, kZero, kSquare, kTwiceY, kZero,
                         [](double) { return 0.0; }, [](double) { return 0.0; },
                         [](double) { return 0.0; }};
    p.spec = scalar_spec(name, c, scalar_atoms({-1.0, 1.0}));
    p.builtin_control = scalar(1.0);
    p.oracle = OracleParams{4, 0, 16, 1.0};
    p.relaxed_weights = {0.5, 0.5};
    p.oracle_note = "relaxed value 0 at weights (1/2, 1/2)";
  } else if (name == "P3a") {
    p.title = "linear BSDE validation, y-driver";
    const double alpha = 0.5;
    ScalarCoefficients c{[alpha](double, double y, double, double) { return alpha * y; },
                         [alpha](double, double, double, double) { return alpha; },
                         kZero, kZero, kZero, kZero,
                         [](double) { return 0.0; }, [](double) { return 0.0; },
                         [](double w) { return w; }};
    p.spec = scalar_spec(name, c, scalar_atoms({0.0}));
    p.spec.parameters["alpha"] = alpha;
    p.builtin_control = scalar(0.0);
    p.oracle_note = "y = exp(alpha (t - T)) W_t, z = exp(alpha (t - T))";
  } else if (name == "P3b") {
    p.title = "linear BSDE validation, z-driver";
    const double beta = 0.3;
    ScalarCoefficients c{[beta](double, double, double z, double) { return beta * z; }, kZero,
                         [beta](double, double, double, double) { return beta; },
                         kZero, kZero, kZero,
                         [](double) { return 0.0; }, [](double) { return 0.0; },
                         [](double w) { return w; }};
    p.spec = scalar_spec(name, c, scalar_atoms({0.0}));
    p.spec.parameters["beta"] = beta;
    p.builtin_control = scalar(0.0);
    p.oracle_note = "y = W_t + beta (t - T), z = 1";
  } else {
    throw ConfigError("unknown problem '" + name + "' (expected one of P0, P1, P2, P3a, P3b)");
  }
  (void)kOne;
  return p;
}

ProblemSpec negate_running_cost(const ProblemSpec& spec) {
  ProblemSpec out = spec;
  out.name = spec.name + "-negated-h";
  out.running_cost = [f = spec.running_cost](double t, CVecRef y, CMatRef z, CVecRef v) {
    return -f(t, y, z, v);
  };
  out.running_cost_dy = [f = spec.running_cost_dy](double t, CVecRef y, CMatRef z, CVecRef v, VecOut o) {
    f(t, y, z, v, o);
    o = -o;
  };
  out.running_cost_dz = [f = spec.running_cost_dz](double t, CVecRef y, CMatRef z, CVecRef v, MatOut o) {
    f(t, y, z, v, o);
    o = -o;
  };
  return out;
}

// ---------------------------------------------------------------------------
// Oracle. Shares no code with the regression solver.

namespace {

constexpr std::size_t kOracleBudget = 1000000;

void require_deterministic_reducible(const ProblemSpec& spec) {
  const int n = spec.dims.n;
  const int d = spec.dims.d;
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Vec xi0 = spec.xi(Vec::Zero(d));
  const auto grid = spec.controls.grid();
  for (int s = 0; s < 16; ++s) {
    Vec w(d), y(n);
    Mat z(n, d);
    for (auto& x : w) x = normal(rng);
    for (auto& x : y) x = normal(rng);
    for (int c = 0; c < n * d; ++c) z.data()[c] = normal(rng);
    if ((spec.xi(w) - xi0).cwiseAbs().maxCoeff() > 0.0) {
      throw OracleError("oracle requires deterministic terminal data; '" + spec.name + "' has random xi");
    }
    const Vec& v = grid[static_cast<std::size_t>(s) % grid.size()];
    const Mat zero = Mat::Zero(n, d);
    const double t = 0.5;
    if ((spec.b(t, y, z, v) - spec.b(t, y, zero, v)).cwiseAbs().maxCoeff() > 0.0 ||
        spec.h(t, y, z, v) != spec.h(t, y, zero, v)) {
      throw OracleError("oracle requires z-independent coefficients; '" + spec.name + "' depends on z");
    }
  }
}

struct BlockIntegrator {
  const ProblemSpec& spec;
  Mat zero;

  // Integrates (y, cost) backward over [t0, t1] from y(t1) with constant v.
  // Returns y(t0) and adds int_{t0}^{t1} h dt to `cost`.
  Vec run(double t0, double t1, const Vec& y_end, const Vec& v, int substeps, double& cost) const {
    const double step = (t1 - t0) / substeps;
    const int n = static_cast<int>(y_end.size());
    Vec y = y_end;
    Vec rate(n);
    auto field = [&](double t, const Vec& state, Vec& out) -> double {
      spec.drift(t, state, zero, v, out);
      return spec.running_cost(t, state, zero, v);
    };
    for (int s = substeps; s > 0; --s) {
      const double t = t0 + s * step;
      // Backward in time: dy/d(-t) = -b.
      Vec k1(n), k2(n), k3(n), k4(n);
      const double c1 = field(t, y, k1);
      const Vec y2 = y - 0.5 * step * k1;
      const double c2 = field(t - 0.5 * step, y2, k2);
      const Vec y3 = y - 0.5 * step * k2;
      const double c3 = field(t - 0.5 * step, y3, k3);
      const Vec y4 = y - step * k3;
      const double c4 = field(t - step, y4, k4);
      y -= step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      cost += step / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
      (void)rate;
    }
    return y;
  }
};

}  // namespace

OracleResult brute_force_optimum(const ProblemSpec& spec, const OracleParams& params) {
  if (params.blocks < 1) throw ConfigError("oracle needs at least one block");
  if (params.substeps < 1) throw ConfigError("oracle needs at least one RK4 substep");
  if (!(params.horizon > 0.0)) throw ConfigError("oracle horizon must be positive");
  require_deterministic_reducible(spec);

  OracleResult result;
  result.params = params;
  result.atoms = spec.controls.grid(params.resolution);
  const std::size_t R = result.atoms.size();
  double total = 1.0;
  for (int j = 0; j < params.blocks; ++j) total *= static_cast<double>(R);
  if (total > static_cast<double>(kOracleBudget)) {
    throw ConfigError("oracle budget exceeded: " + std::to_string(R) + "^" + std::to_string(params.blocks) +
                      " candidates > 1e6");
  }
  result.candidates = static_cast<std::size_t>(total);

  const int B = params.blocks;
  const double width = params.horizon / B;
  const BlockIntegrator integrator{spec, Mat::Zero(spec.dims.n, spec.dims.d)};
  const Vec terminal = spec.xi(Vec::Zero(spec.dims.d));

  std::vector<int> indices(static_cast<std::size_t>(B), 0);
  std::vector<int> best_indices;
  double best = INFINITY;

  auto better = [&](double value) {
    if (best_indices.empty()) return true;
    const double tol = 1e-14 * std::max(1.0, std::abs(best));
    if (value < best - tol) return true;
    if (value > best + tol) return false;
    return indices < best_indices;  // lexicographic tie-break
  };

  // Depth-first over suffixes: block B-1 first, sharing integration work.
  std::function<void(int, const Vec&, double)> descend = [&](int block, const Vec& y_end, double cost) {
    const double t1 = block == B - 1 ? params.horizon : (block + 1) * width;
    const double t0 = block * width;
    for (std::size_t a = 0; a < R; ++a) {
      indices[static_cast<std::size_t>(block)] = static_cast<int>(a);
      double block_cost = cost;
      const Vec y0 = integrator.run(t0, t1, y_end, result.atoms[a], params.substeps, block_cost);
      if (block == 0) {
        const double value = spec.terminal_cost(y0) + block_cost;
        if (std::isfinite(value) && better(value)) {
          best = value;
          best_indices = indices;
        }
      } else {
        descend(block - 1, y0, block_cost);
      }
    }
  };
  descend(B - 1, terminal, 0.0);
  if (best_indices.empty()) throw NumericalError("oracle found no finite candidate");

  result.value = best;
  result.atom_indices = best_indices;
  for (int idx : best_indices) result.pattern.push_back(result.atoms[static_cast<std::size_t>(idx)]);
  return result;
}

ControlLaw oracle_law(const ProblemSpec& spec, const OracleResult& result, const TimeGrid& grid) {
  const int B = static_cast<int>(result.pattern.size());
  std::vector<Vec> values;
  values.reserve(static_cast<std::size_t>(grid.steps()));
  for (int i = 0; i < grid.steps(); ++i) {
    const double pos = grid.node(i) / grid.horizon() * B;
    int block = static_cast<int>(std::floor(pos + 1e-9));
    block = std::clamp(block, 0, B - 1);
    values.push_back(result.pattern[static_cast<std::size_t>(block)]);
  }
  return schedule_law(spec.controls, std::move(values), "oracle");
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty() && item.front() == '+') item.erase(0, 1);
    double value = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), value);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      throw ConfigError("malformed number '" + item + "' in list '" + text + "'");
    }
    out.push_back(value);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

ControlLaw resolve_control(const BuiltinProblem& problem, const std::string& description, const TimeGrid& grid) {
  const auto& spec = problem.spec;
  if (description == "builtin") return constant_law(spec.controls, problem.builtin_control, "builtin");
  if (description.rfind("const:", 0) == 0) {
    const auto values = parse_number_list(description.substr(6));
    if (static_cast<int>(values.size()) != spec.dims.k) {
      throw ConfigError("control '" + description + "' has the wrong dimension");
    }
    const Vec v = Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
    if (!spec.controls.contains(v)) throw ConfigError("control value in '" + description + "' is not in U");
    return constant_law(spec.controls, v, description);
  }
  if (description == "oracle") {
    if (!problem.oracle) throw OracleError("no enumeration oracle for problem " + problem.name);
    OracleParams params = *problem.oracle;
    params.horizon = grid.horizon();
    const auto result = brute_force_optimum(spec, params);
    return oracle_law(spec, result, grid);
  }
  if (description == "feedback:sign") {
    if (spec.dims.k != 1 || spec.dims.d != 1) throw ConfigError("feedback:sign needs k = d = 1");
    const Vec plus = Vec::Constant(1, 1.0), minus = Vec::Constant(1, -1.0);
    if (!spec.controls.contains(plus) || !spec.controls.contains(minus)) {
      throw ConfigError("feedback:sign needs +1 and -1 in U");
    }
    return ControlLaw(
        spec.controls,
        [](int, const PathView& path, VecOut out) { out[0] = path.current()[0] >= 0.0 ? 1.0 : -1.0; },
        description, false);
  }
  throw ConfigError("unknown control '" + description + "' (expected builtin, const:<v>, oracle or feedback:sign)");
}

std::pair<double, double> analytic_solution(const std::string& name, double t, double w, double horizon) {
  if (name == "P3a") {
    const double phi = std::exp(0.5 * (t - horizon));
    return {phi * w, phi};
  }
  if (name == "P3b") return {w + 0.3 * (t - horizon), 1.0};
  throw OracleError("no closed-form solution for problem '" + name + "'");
}

}  // namespace bsmp
