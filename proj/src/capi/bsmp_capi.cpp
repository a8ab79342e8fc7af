#include "bsmp/bsmp.h"

#include "bsmp/acceptance.hpp"
#include "bsmp/adjoint.hpp"
#include "bsmp/bsde.hpp"
#include "bsmp/errors.hpp"
#include "bsmp/export.hpp"
#include "bsmp/maximum_principle.hpp"
#include "bsmp/parallel.hpp"
#include "bsmp/problems.hpp"
#include "bsmp/relaxed.hpp"
#include "bsmp/restriction.hpp"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <optional>
#include <string>

using Json = nlohmann::ordered_json;

struct ControlData {
  std::shared_ptr<const bsmp::BuiltinProblem> problem;
  std::optional<bsmp::ControlLaw> strict;
  std::optional<bsmp::RelaxedControlLaw> relaxed;
  std::optional<bsmp::OracleResult> oracle;

  const std::string& label() const { return strict ? strict->label() : relaxed->label(); }
};

struct bsmp_problem {
  std::shared_ptr<bsmp::BuiltinProblem> problem;
};

struct bsmp_bundle {
  std::shared_ptr<const bsmp::BrownianBundle> bundle;
};

struct bsmp_control {
  std::shared_ptr<const ControlData> data;
};

struct bsmp_trajectory {
  std::shared_ptr<const ControlData> control;
  bsmp::RegressionConfig regression;
  bsmp::Trajectory traj;
};

struct bsmp_adjoint {
  std::shared_ptr<const ControlData> control;
  bsmp::RegressionConfig regression;
  std::shared_ptr<const bsmp_trajectory> traj;
  bsmp::AdjointPath adj;
};

namespace {

thread_local std::string last_error;

template <class F>
bsmp_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return BSMP_OK;
  } catch (const bsmp::Error& e) {
    last_error = e.what();
    return static_cast<bsmp_status>(e.code());
  } catch (const std::exception& e) {
    last_error = e.what();
    return BSMP_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw bsmp::ConfigError(std::string("null argument: ") + what);
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

bsmp::RegressionConfig to_config(bsmp_regression r) {
  bsmp::RegressionConfig c;
  c.degree = r.degree;
  c.ridge = r.ridge;
  return c;
}

bsmp::RunMetadata meta(const char* command, const std::string& problem, const bsmp::BrownianBundle* bundle,
                       const bsmp::RegressionConfig& regression) {
  bsmp::RunMetadata m{command, problem, 0, 0, 0, regression};
  if (bundle != nullptr) {
    m.seed = bundle->seed();
    m.steps = bundle->grid().steps();
    m.paths = bundle->paths();
  }
  return m;
}

const bsmp::ControlLaw& strict_of(const bsmp_control* c) {
  require(c, "control");
  if (!c->data->strict) throw bsmp::ConfigError("a strict control is required, got relaxed control " + c->data->label());
  return *c->data->strict;
}

const bsmp::RelaxedControlLaw& relaxed_of(const bsmp_control* c) {
  require(c, "control");
  if (!c->data->relaxed) throw bsmp::ConfigError("a relaxed control is required, got strict control " + c->data->label());
  return *c->data->relaxed;
}

void check_same_grid(const ControlData& control, const bsmp::BrownianBundle& bundle) {
  if (control.problem->spec.dims.d != bundle.dim()) throw bsmp::ConfigError("bundle dimension does not match the problem");
}

std::vector<bsmp::Vec> candidate_grid(const ControlData& control, int resolution) {
  if (control.oracle && resolution <= 0) return control.oracle->atoms;
  return control.problem->spec.controls.grid(resolution);
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json vec_json(const bsmp::Vec& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(x);
  return out;
}

Json document(const bsmp::RunMetadata& m, Json results) {
  Json doc;
  doc["metadata"] = bsmp::metadata_json(m);
  for (auto& [key, value] : results.items()) doc[key] = value;
  return doc;
}

void emit(char** out, const Json& doc) { *out = copy_string(doc.dump(2) + "\n"); }

std::vector<int> to_levels(const int* levels, size_t count) {
  if (count == 0 || levels == nullptr) throw bsmp::ConfigError("at least one chattering level is required");
  return std::vector<int>(levels, levels + count);
}

bsmp::Vec to_vec(const double* values, size_t count) {
  bsmp::Vec v(static_cast<Eigen::Index>(count));
  for (size_t j = 0; j < count; ++j) v[static_cast<Eigen::Index>(j)] = values[j];
  return v;
}

}  // namespace

extern "C" {

BSMP_API const char* bsmp_version(void) { return bsmp::kToolVersion; }
BSMP_API const char* bsmp_last_error(void) { return last_error.c_str(); }
BSMP_API void bsmp_string_free(char* text) { std::free(text); }

BSMP_API bsmp_regression bsmp_regression_default(void) {
  const bsmp::RegressionConfig c;
  return bsmp_regression{c.degree, c.ridge};
}

BSMP_API void bsmp_set_threads(int workers) { bsmp::set_worker_count(workers); }
BSMP_API int bsmp_threads(void) { return bsmp::worker_count(); }

BSMP_API int bsmp_problem_count(void) { return static_cast<int>(bsmp::problem_names().size()); }

BSMP_API const char* bsmp_problem_name(int index) {
  static const std::vector<std::string> names = bsmp::problem_names();
  if (index < 0 || index >= static_cast<int>(names.size())) return nullptr;
  return names[static_cast<size_t>(index)].c_str();
}

BSMP_API bsmp_status bsmp_problem_open(const char* name, bsmp_problem** out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    *out = new bsmp_problem{std::make_shared<bsmp::BuiltinProblem>(bsmp::get_problem(name))};
  });
}

BSMP_API bsmp_status bsmp_problem_set_oracle(bsmp_problem* problem, int blocks, int resolution, int substeps) {
  return guarded([&] {
    require(problem, "problem");
    auto params = problem->problem->oracle.value_or(bsmp::OracleParams{});
    params.horizon = problem->problem->horizon;
    if (blocks > 0) params.blocks = blocks;
    if (resolution > 0) params.resolution = resolution;
    if (substeps > 0) params.substeps = substeps;
    problem->problem->oracle = params;
  });
}

BSMP_API bsmp_status bsmp_problem_oracle_steps(const bsmp_problem* problem, int* steps) {
  return guarded([&] {
    require(problem, "problem");
    require(steps, "steps");
    const auto& p = *problem->problem;
    if (!p.oracle) throw bsmp::OracleError("no enumeration oracle for " + p.name + ": " + p.oracle_note);
    *steps = p.oracle->fine_steps();
  });
}

BSMP_API bsmp_status bsmp_problem_dims(const bsmp_problem* problem, int* n, int* d, int* k) {
  return guarded([&] {
    require(problem, "problem");
    const auto& dims = problem->problem->spec.dims;
    if (n) *n = dims.n;
    if (d) *d = dims.d;
    if (k) *k = dims.k;
  });
}

BSMP_API bsmp_status bsmp_problem_relaxed_weights(const bsmp_problem* problem, double* out, size_t capacity,
                                                  size_t* count) {
  return guarded([&] {
    require(problem, "problem");
    require(count, "count");
    const auto& w = problem->problem->relaxed_weights;
    *count = w.size();
    if (out != nullptr)
      for (size_t j = 0; j < std::min(capacity, w.size()); ++j) out[j] = w[j];
  });
}

BSMP_API void bsmp_problem_free(bsmp_problem* problem) { delete problem; }

BSMP_API bsmp_status bsmp_bundle_sample(const bsmp_problem* problem, int steps, int paths, uint64_t seed,
                                        bsmp_bundle** out) {
  return guarded([&] {
    require(problem, "problem");
    require(out, "out");
    if (steps < 1) throw bsmp::ConfigError("grid must have at least one step");
    if (paths < 1) throw bsmp::ConfigError("at least one path is required");
    const auto grid = bsmp::build_grid(problem->problem->horizon, steps);
    *out = new bsmp_bundle{bsmp::sample_brownian(grid, problem->problem->spec.dims, paths, seed)};
  });
}

BSMP_API void bsmp_bundle_free(bsmp_bundle* bundle) { delete bundle; }

BSMP_API bsmp_status bsmp_control_resolve(const bsmp_problem* problem, const bsmp_bundle* bundle,
                                          const char* description, bsmp_control** out) {
  return guarded([&] {
    require(problem, "problem");
    require(bundle, "bundle");
    require(description, "description");
    require(out, "out");
    auto data = std::make_shared<ControlData>();
    data->problem = problem->problem;
    const auto& grid = bundle->bundle->grid();
    if (std::string(description) == "oracle" && problem->problem->oracle) {
      data->oracle = bsmp::brute_force_optimum(problem->problem->spec, *problem->problem->oracle);
      data->strict = bsmp::oracle_law(problem->problem->spec, *data->oracle, grid);
    } else {
      data->strict = bsmp::resolve_control(*problem->problem, description, grid);
    }
    *out = new bsmp_control{std::move(data)};
  });
}

BSMP_API bsmp_status bsmp_control_relaxed(const bsmp_problem* problem, const double* weights, size_t count,
                                          bsmp_control** out) {
  return guarded([&] {
    require(problem, "problem");
    require(weights, "weights");
    require(out, "out");
    const auto atoms = problem->problem->spec.controls.grid();
    if (count != atoms.size()) {
      throw bsmp::ConfigError("expected " + std::to_string(atoms.size()) + " relaxed weights, got " +
                              std::to_string(count));
    }
    auto data = std::make_shared<ControlData>();
    data->problem = problem->problem;
    data->relaxed = bsmp::constant_relaxed(atoms, to_vec(weights, count));
    *out = new bsmp_control{std::move(data)};
  });
}

BSMP_API bsmp_status bsmp_control_embed(const bsmp_control* strict_control, bsmp_control** out) {
  return guarded([&] {
    require(out, "out");
    const auto& law = strict_of(strict_control);
    auto data = std::make_shared<ControlData>();
    data->problem = strict_control->data->problem;
    data->relaxed = bsmp::embed_strict(law, data->problem->spec.controls.grid());
    *out = new bsmp_control{std::move(data)};
  });
}

BSMP_API bsmp_status bsmp_control_spike(const bsmp_control* base, const bsmp_bundle* bundle, double tau, double width,
                                        const double* value, size_t k, bsmp_control** out) {
  return guarded([&] {
    require(bundle, "bundle");
    require(value, "value");
    require(out, "out");
    const auto& law = strict_of(base);
    auto data = std::make_shared<ControlData>();
    data->problem = base->data->problem;
    data->strict = bsmp::spike_perturb(law, bsmp::SpikeSpec{tau, width, to_vec(value, k)}, bundle->bundle->grid());
    *out = new bsmp_control{std::move(data)};
  });
}

BSMP_API bsmp_status bsmp_control_chattering(const bsmp_control* relaxed, const bsmp_bundle* bundle, int level,
                                             bsmp_control** out) {
  return guarded([&] {
    require(bundle, "bundle");
    require(out, "out");
    const auto& q = relaxed_of(relaxed);
    auto data = std::make_shared<ControlData>();
    data->problem = relaxed->data->problem;
    // Chattering values live in the problem's control set, not the atom list.
    const auto schedule = bsmp::chattering_sequence(q, level, bundle->bundle->grid());
    const auto& set = data->problem->spec.controls;
    data->strict = bsmp::ControlLaw(
        set, [law = schedule.law](int node, const bsmp::PathView& path, bsmp::VecOut v) { law.evaluate(node, path, v); },
        schedule.law.label(), schedule.law.time_only());
    *out = new bsmp_control{std::move(data)};
  });
}

BSMP_API int bsmp_control_is_relaxed(const bsmp_control* control) {
  return control != nullptr && control->data->relaxed ? 1 : 0;
}

BSMP_API const char* bsmp_control_label(const bsmp_control* control) {
  return control == nullptr ? "" : control->data->label().c_str();
}

BSMP_API bsmp_status bsmp_control_distance(const bsmp_control* a, const bsmp_control* b, const bsmp_bundle* bundle,
                                           double* out) {
  return guarded([&] {
    require(bundle, "bundle");
    require(out, "out");
    *out = bsmp::control_distance(strict_of(a), strict_of(b), *bundle->bundle);
  });
}

BSMP_API void bsmp_control_free(bsmp_control* control) { delete control; }

BSMP_API bsmp_status bsmp_solve(const bsmp_control* control, const bsmp_bundle* bundle, bsmp_regression regression,
                                bsmp_trajectory** out) {
  return guarded([&] {
    require(control, "control");
    require(bundle, "bundle");
    require(out, "out");
    const auto& data = *control->data;
    check_same_grid(data, *bundle->bundle);
    const auto config = to_config(regression);
    const auto& spec = data.problem->spec;
    auto traj = data.strict ? bsmp::solve_bsde(spec, *data.strict, bundle->bundle, config)
                            : bsmp::solve_relaxed_bsde(spec, *data.relaxed, bundle->bundle, config);
    *out = new bsmp_trajectory{control->data, config, std::move(traj)};
  });
}

namespace {

bsmp::CostEstimate cost_of(const bsmp_trajectory& t) {
  const auto& spec = t.control->problem->spec;
  return t.control->strict ? bsmp::evaluate_cost(spec, *t.control->strict, t.traj)
                           : bsmp::relaxed_cost(spec, *t.control->relaxed, t.traj);
}

void check_index(int path, int node, int paths, int steps) {
  if (path < 0 || path >= paths || node < 0 || node > steps) throw bsmp::ConfigError("path or node index out of range");
}

}  // namespace

BSMP_API bsmp_status bsmp_trajectory_cost(const bsmp_trajectory* traj, double* value, double* standard_error) {
  return guarded([&] {
    require(traj, "trajectory");
    const auto cost = cost_of(*traj);
    if (value) *value = cost.value;
    if (standard_error) *standard_error = cost.standard_error;
  });
}

BSMP_API bsmp_status bsmp_trajectory_y(const bsmp_trajectory* traj, int path, int node, double* out, size_t n) {
  return guarded([&] {
    require(traj, "trajectory");
    require(out, "out");
    check_index(path, node, traj->traj.paths(), traj->traj.steps());
    const auto y = traj->traj.y(path, node);
    if (n != static_cast<size_t>(y.size())) throw bsmp::ConfigError("output length must equal n");
    for (size_t j = 0; j < n; ++j) out[j] = y[static_cast<Eigen::Index>(j)];
  });
}

BSMP_API bsmp_status bsmp_trajectory_z(const bsmp_trajectory* traj, int path, int node, double* out, size_t nd) {
  return guarded([&] {
    require(traj, "trajectory");
    require(out, "out");
    check_index(path, node, traj->traj.paths(), traj->traj.steps());
    const auto z = traj->traj.z(path, node);
    if (nd != static_cast<size_t>(z.size())) throw bsmp::ConfigError("output length must equal n * d");
    for (size_t j = 0; j < nd; ++j) out[j] = z.data()[j];
  });
}

BSMP_API void bsmp_trajectory_free(bsmp_trajectory* traj) { delete traj; }

BSMP_API bsmp_status bsmp_adjoint_solve(const bsmp_trajectory* traj, bsmp_adjoint** out) {
  return guarded([&] {
    require(traj, "trajectory");
    require(out, "out");
    const auto& data = *traj->control;
    const auto& spec = data.problem->spec;
    auto adj = data.strict ? bsmp::solve_adjoint(spec, *data.strict, traj->traj)
                           : bsmp::solve_relaxed_adjoint(spec, *data.relaxed, traj->traj);
    auto keep = std::make_shared<const bsmp_trajectory>(*traj);
    *out = new bsmp_adjoint{traj->control, traj->regression, std::move(keep), std::move(adj)};
  });
}

BSMP_API bsmp_status bsmp_adjoint_p(const bsmp_adjoint* adjoint, int path, int node, double* out, size_t n) {
  return guarded([&] {
    require(adjoint, "adjoint");
    require(out, "out");
    check_index(path, node, adjoint->adj.paths(), adjoint->adj.steps());
    const auto p = adjoint->adj.p(path, node);
    if (n != static_cast<size_t>(p.size())) throw bsmp::ConfigError("output length must equal n");
    for (size_t j = 0; j < n; ++j) out[j] = p[static_cast<Eigen::Index>(j)];
  });
}

BSMP_API void bsmp_adjoint_free(bsmp_adjoint* adjoint) { delete adjoint; }

BSMP_API bsmp_status bsmp_trajectory_csv(const bsmp_trajectory* traj, int max_paths, char** out) {
  return guarded([&] {
    require(traj, "trajectory");
    require(out, "out");
    const auto m = meta("solve", traj->control->problem->name, &traj->traj.bundle(), traj->regression);
    *out = copy_string(bsmp::trajectory_csv(traj->traj, m, max_paths));
  });
}

BSMP_API bsmp_status bsmp_cost_json(const bsmp_trajectory* traj, char** out) {
  return guarded([&] {
    require(traj, "trajectory");
    require(out, "out");
    const auto& t = *traj;
    Json results;
    results["problem"] = t.control->problem->name;
    results["control"] = t.control->label();
    results["relaxed"] = t.control->relaxed.has_value();
    results["cost"] = bsmp::to_json(cost_of(t));
    Json y0 = Json::array();
    for (int j = 0; j < t.traj.n(); ++j) {
      double sum = 0.0;
      for (int m = 0; m < t.traj.paths(); ++m) sum += t.traj.y(m, 0)[j];
      y0.push_back(sum / t.traj.paths());
    }
    results["mean_y0"] = y0;
    emit(out, document(meta("solve", t.control->problem->name, &t.traj.bundle(), t.regression), results));
  });
}

BSMP_API bsmp_status bsmp_adjoint_csv(const bsmp_adjoint* adjoint, int max_paths, char** out) {
  return guarded([&] {
    require(adjoint, "adjoint");
    require(out, "out");
    const auto m = meta("adjoint", adjoint->control->problem->name, &adjoint->traj->traj.bundle(), adjoint->regression);
    *out = copy_string(bsmp::adjoint_csv(adjoint->adj, m, max_paths));
  });
}

BSMP_API bsmp_status bsmp_check_json(const bsmp_adjoint* adjoint, double tolerance, int blocks, int resolution,
                                     int* pass, char** out) {
  return guarded([&] {
    require(adjoint, "adjoint");
    require(out, "out");
    const auto& data = *adjoint->control;
    const auto& spec = data.problem->spec;
    const auto& traj = adjoint->traj->traj;
    bsmp::CheckOptions options;
    options.tolerance = tolerance;
    options.blocks = blocks >= 0 ? blocks : (data.oracle ? data.oracle->params.blocks : 0);
    const auto candidates = candidate_grid(data, resolution);
    const auto report = data.strict ? bsmp::check_necessary(spec, *data.strict, traj, adjoint->adj, candidates, options)
                                    : bsmp::check_relaxed_necessary(spec, *data.relaxed, traj, adjoint->adj, candidates,
                                                                    options);
    const char* command = data.strict ? "check" : "check-relaxed";
    Json results;
    results["problem"] = data.problem->name;
    results["control"] = data.label();
    results["candidates"] = candidates.size();
    results["cost"] = bsmp::to_json(cost_of(*adjoint->traj));
    results["report"] = bsmp::to_json(report);
    results["verdict"] = report.pass ? "pass" : "fail";
    if (pass) *pass = report.pass ? 1 : 0;
    emit(out, document(meta(command, data.problem->name, &traj.bundle(), adjoint->regression), results));
  });
}

BSMP_API bsmp_status bsmp_sufficiency_json(const bsmp_problem* problem, int samples, uint64_t seed, int relaxed,
                                           int* pass, char** out) {
  return guarded([&] {
    require(problem, "problem");
    require(out, "out");
    const auto& spec = problem->problem->spec;
    const auto report = relaxed ? bsmp::check_relaxed_sufficient(spec, spec.controls.grid(), samples, seed)
                                : bsmp::check_sufficient_assumptions(spec, samples, seed);
    auto m = meta("sufficiency", problem->problem->name, nullptr, {});
    m.seed = seed;
    Json results;
    results["problem"] = problem->problem->name;
    results["sufficiency"] = bsmp::to_json(report);
    if (pass) *pass = report.pass ? 1 : 0;
    emit(out, document(m, results));
  });
}

BSMP_API bsmp_status bsmp_spike_study_json(const bsmp_control* control, const bsmp_bundle* bundle,
                                           bsmp_regression regression, double tau, const double* value, size_t k,
                                           const double* widths, size_t count, char** out) {
  return guarded([&] {
    require(bundle, "bundle");
    require(value, "value");
    require(widths, "widths");
    require(out, "out");
    const auto& law = strict_of(control);
    const auto& problem = *control->data->problem;
    const auto config = to_config(regression);
    const std::vector<double> thetas(widths, widths + count);
    const auto study = bsmp::spike_convergence_study(problem.spec, law, tau, to_vec(value, k), thetas, bundle->bundle,
                                                     config);
    Json rows = Json::array();
    for (const auto& r : study.rows) rows.push_back({{"theta", r.width}, {"y_moment", r.y_moment}, {"z_moment", r.z_moment}});
    Json results;
    results["problem"] = problem.name;
    results["control"] = law.label();
    results["tau"] = tau;
    results["replacement"] = vec_json(to_vec(value, k));
    results["rows"] = rows;
    results["y_slope"] = number_or_null(study.y_slope);
    results["z_slope"] = number_or_null(study.z_slope);
    emit(out, document(meta("spike-study", problem.name, bundle->bundle.get(), config), results));
  });
}

BSMP_API bsmp_status bsmp_chattering_study_json(const bsmp_control* relaxed, const bsmp_bundle* bundle,
                                                bsmp_regression regression, const int* levels, size_t count,
                                                char** out) {
  return guarded([&] {
    require(bundle, "bundle");
    require(out, "out");
    const auto& q = relaxed_of(relaxed);
    const auto& problem = *relaxed->data->problem;
    const auto config = to_config(regression);
    const auto study =
        bsmp::chattering_convergence_study(problem.spec, q, to_levels(levels, count), bundle->bundle, config);
    Json rows = Json::array();
    for (const auto& r : study.rows) {
      rows.push_back({{"level", r.level}, {"y_moment", r.y_moment}, {"z_moment", r.z_moment},
                      {"cost_gap", r.cost_gap}, {"strict_cost", r.strict_cost},
                      {"strict_cost_stderr", r.strict_cost_stderr}, {"p_moment", r.p_moment},
                      {"b_y_gap", r.b_y_gap}, {"b_z_gap", r.b_z_gap}, {"h_y_gap", r.h_y_gap}, {"h_z_gap", r.h_z_gap}});
    }
    Json results;
    results["problem"] = problem.name;
    results["control"] = q.label();
    results["relaxed_cost"] = bsmp::to_json(study.relaxed);
    results["rows"] = rows;
    emit(out, document(meta("chattering-study", problem.name, bundle->bundle.get(), config), results));
  });
}

BSMP_API bsmp_status bsmp_stable_study_json(const bsmp_control* relaxed, const bsmp_bundle* bundle, const int* levels,
                                            size_t count, char** out) {
  return guarded([&] {
    require(bundle, "bundle");
    require(out, "out");
    const auto& q = relaxed_of(relaxed);
    const auto& problem = *relaxed->data->problem;
    const std::vector<bsmp::TestFunction> fns = {[](double, bsmp::CVecRef a) { return a[0]; },
                                                 [](double t, bsmp::CVecRef) { return t * t; }};
    const char* names[] = {"a", "t^2"};
    const auto rows = bsmp::stable_convergence_diagnostic(q, to_levels(levels, count), fns, *bundle->bundle);
    Json table = Json::array();
    for (const auto& r : rows) table.push_back({{"level", r.level}, {"function", names[r.function]}, {"gap", r.gap}});
    Json results;
    results["problem"] = problem.name;
    results["control"] = q.label();
    results["rows"] = table;
    emit(out, document(meta("stable-study", problem.name, bundle->bundle.get(), {}), results));
  });
}

BSMP_API bsmp_status bsmp_improve_json(const bsmp_control* initial, const bsmp_bundle* bundle,
                                       bsmp_regression regression, int iterations, int resolution, char** out) {
  return guarded([&] {
    require(bundle, "bundle");
    require(out, "out");
    const auto& law = strict_of(initial);
    const auto& problem = *initial->data->problem;
    const auto config = to_config(regression);
    bsmp::AscentOptions options;
    options.iterations = iterations;
    options.resolution = resolution;
    const auto result = bsmp::improve_by_hamiltonian_ascent(problem.spec, law, bundle->bundle, config, options);
    Json iterates = Json::array();
    for (size_t j = 0; j < result.controls.size(); ++j) {
      Json row;
      row["iteration"] = j;
      row["control"] = result.controls[j].label();
      row["cost"] = result.costs[j].value;
      row["cost_stderr"] = result.costs[j].standard_error;
      row["distance_to_previous"] = j == 0 ? Json(nullptr) : Json(result.distances[j - 1]);
      iterates.push_back(row);
    }
    Json results;
    results["problem"] = problem.name;
    results["iterates"] = iterates;
    results["converged"] = result.converged;
    results["warnings"] = result.warnings;
    emit(out, document(meta("improve", problem.name, bundle->bundle.get(), config), results));
  });
}

BSMP_API bsmp_status bsmp_oracle_json(const bsmp_problem* problem, char** out) {
  return guarded([&] {
    require(problem, "problem");
    require(out, "out");
    const auto& p = *problem->problem;
    if (!p.oracle) throw bsmp::OracleError("no enumeration oracle for " + p.name + ": " + p.oracle_note);
    const auto result = bsmp::brute_force_optimum(p.spec, *p.oracle);
    Json pattern = Json::array();
    for (const auto& v : result.pattern) pattern.push_back(vec_json(v));
    Json atoms = Json::array();
    for (const auto& v : result.atoms) atoms.push_back(vec_json(v));
    Json results;
    results["problem"] = p.name;
    results["blocks"] = result.params.blocks;
    results["substeps"] = result.params.substeps;
    results["atoms"] = atoms;
    results["candidates"] = result.candidates;
    results["value"] = result.value;
    results["control_pattern"] = pattern;
    emit(out, document(meta("oracle", p.name, nullptr, {}), results));
  });
}

BSMP_API bsmp_status bsmp_restrict_verify_json(const bsmp_control* control, const bsmp_bundle* bundle,
                                               bsmp_regression regression, int* pass, char** out) {
  return guarded([&] {
    require(bundle, "bundle");
    require(out, "out");
    const auto& law = strict_of(control);
    const auto& problem = *control->data->problem;
    const auto config = to_config(regression);
    const auto direct =
        bsmp::evaluate_cost(problem.spec, law, bsmp::solve_bsde(problem.spec, law, bundle->bundle, config));
    const auto aug = bsmp::augment_problem(problem.spec);
    const auto restricted = bsmp::restricted_cost(aug, bsmp::solve_bsde(aug.spec, law, bundle->bundle, config));
    const double diff = std::abs(direct.value - restricted.value);
    const double tol =
        std::max(3.0 * bsmp::combined_standard_error(direct, restricted), 1e-10 * (1.0 + std::abs(direct.value)));
    Json results;
    results["problem"] = problem.name;
    results["control"] = law.label();
    results["J"] = bsmp::to_json(direct);
    results["J_restricted"] = bsmp::to_json(restricted);
    results["abs_diff"] = diff;
    results["tolerance"] = tol;
    results["verdict"] = diff <= tol ? "pass" : "fail";
    if (pass) *pass = diff <= tol ? 1 : 0;
    emit(out, document(meta("restrict-verify", problem.name, bundle->bundle.get(), config), results));
  });
}

BSMP_API bsmp_status bsmp_write_file(const char* path, const char* content) {
  return guarded([&] {
    require(path, "path");
    require(content, "content");
    bsmp::write_file_atomic(path, content);
  });
}

BSMP_API int bsmp_suite_count(void) { return static_cast<int>(bsmp::acceptance_criteria().size()); }

BSMP_API bsmp_status bsmp_suite_criterion(int index, int* id, const char** title) {
  return guarded([&] {
    const auto& all = bsmp::acceptance_criteria();
    if (index < 0 || index >= static_cast<int>(all.size())) throw bsmp::ConfigError("criterion index out of range");
    const auto& c = all[static_cast<size_t>(index)];
    if (id) *id = c.id;
    if (title) *title = c.title.c_str();
  });
}

BSMP_API bsmp_status bsmp_suite_run(uint64_t seed, const int* only, size_t count, bsmp_suite_callback callback,
                                    void* user, int* failures) {
  return guarded([&] {
    bsmp::SuiteSettings settings;
    settings.seed = seed;
    std::vector<int> ids;
    if (count > 0) {
      require(only, "only");
      ids.assign(only, only + count);
      for (int id : ids) {
        if (id < 1 || id > static_cast<int>(bsmp::acceptance_criteria().size()))
          throw bsmp::ConfigError("unknown criterion " + std::to_string(id));
      }
    }
    int failed = 0;
    bsmp::run_suite(settings, ids, [&](const bsmp::CriterionResult& r) {
      if (!r.pass) ++failed;
      if (callback) callback(r.id, r.pass ? 1 : 0, r.title.c_str(), r.summary.c_str(), r.artifact.c_str(), user);
    });
    if (failures) *failures = failed;
  });
}

}  // extern "C"
