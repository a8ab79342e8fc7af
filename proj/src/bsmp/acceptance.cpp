#include "bsmp/acceptance.hpp"

#include "bsmp/adjoint.hpp"
#include "bsmp/errors.hpp"
#include "bsmp/export.hpp"
#include "bsmp/maximum_principle.hpp"
#include "bsmp/parallel.hpp"
#include "bsmp/problems.hpp"
#include "bsmp/relaxed.hpp"
#include "bsmp/restriction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace bsmp {

namespace {

using Json = nlohmann::ordered_json;

std::string fmt(const char* pattern, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, a);
  return buf;
}

std::string g3(double v) { return fmt("%.3g", v); }

RunMetadata suite_meta(const SuiteSettings& s, int steps, int paths, const std::string& problem = {}) {
  return RunMetadata{"suite", problem, s.seed, steps, paths, s.regression};
}

CriterionResult finish(int id, const std::string& title, bool pass, std::string summary, Json results,
                       const Json& metadata) {
  Json doc;
  doc["criterion"] = id;
  doc["title"] = title;
  doc["metadata"] = metadata;
  doc["results"] = std::move(results);
  doc["verdict"] = pass ? "pass" : "fail";
  return {id, title, pass, std::move(summary), doc.dump(2) + "\n"};
}

int fine_paths(const SuiteSettings& s) { return std::min(s.paths, s.fine_paths); }

std::shared_ptr<const BrownianBundle> make_bundle(const ProblemSpec& spec, int steps, int paths,
                                                  std::uint64_t seed) {
  return sample_brownian(build_grid(1.0, steps), spec.dims, paths, seed);
}

/// x_{j+1} <= 1.1 x_j (+ a rounding floor for columns that vanish analytically).
bool non_increasing(const std::vector<double>& xs) {
  for (std::size_t j = 1; j < xs.size(); ++j)
    if (!(xs[j] <= 1.1 * xs[j - 1] + 1e-24)) return false;
  return true;
}

double max_abs_diff(const Trajectory& a, const Trajectory& b) {
  double worst = 0.0;
  for (int m = 0; m < a.paths(); ++m)
    for (int i = 0; i <= a.steps(); ++i) {
      worst = std::max(worst, (a.y(m, i) - b.y(m, i)).cwiseAbs().maxCoeff());
      worst = std::max(worst, (a.z(m, i) - b.z(m, i)).cwiseAbs().maxCoeff());
    }
  return worst;
}

double max_abs_diff(const AdjointPath& a, const AdjointPath& b) {
  double worst = 0.0;
  for (int m = 0; m < a.paths(); ++m)
    for (int i = 0; i <= a.steps(); ++i) worst = std::max(worst, (a.p(m, i) - b.p(m, i)).cwiseAbs().maxCoeff());
  return worst;
}

// ---------------------------------------------------------------------------

CriterionResult closed_form_solver(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "BSDE solver against closed forms";
  Json results = Json::array();
  bool pass = true;
  std::string summary;
  for (const std::string name : {"P3a", "P3b"}) {
    const auto problem = get_problem(name);
    const auto bundle = make_bundle(problem.spec, s.steps, s.paths, s.seed);
    const auto& grid = bundle->grid();
    const auto law = resolve_control(problem, "builtin", grid);
    const auto traj = solve_bsde(problem.spec, law, bundle, s.regression);
    double ry = 0.0, rz = 0.0;
    for (int i = 0; i <= s.steps; ++i) {
      double sy = 0.0, sz = 0.0;
      for (int m = 0; m < s.paths; ++m) {
        const auto [y, z] = analytic_solution(name, grid.node(i), bundle->state(m, i)[0]);
        sy += std::pow(traj.y(m, i)[0] - y, 2);
        if (i < s.steps) sz += std::pow(traj.z(m, i)(0, 0) - z, 2);
      }
      ry = std::max(ry, std::sqrt(sy / s.paths));
      if (i < s.steps) rz = std::max(rz, std::sqrt(sz / s.paths));
    }
    const bool ok = ry <= 0.02 && rz <= 0.05;
    pass = pass && ok;
    results.push_back({{"problem", name}, {"rmse_y", ry}, {"rmse_z", rz}, {"pass", ok}});
    summary += (summary.empty() ? "" : "; ") + name + " rmse_y=" + g3(ry) + " rmse_z=" + g3(rz);
  }
  return finish(1, title, pass, summary, results, metadata_json(suite_meta(s, s.steps, s.paths)));
}

CriterionResult restriction_identity(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "cost-restriction identity";
  Json results = Json::array();
  bool pass = true;
  double worst_ratio = 0.0;
  for (const std::string name : {"P0", "P1", "P2"}) {
    const auto problem = get_problem(name);
    const auto bundle = make_bundle(problem.spec, s.steps, s.paths, s.seed);
    const auto aug = augment_problem(problem.spec);
    for (const std::string requested : {"const:+1", "const:-1", "oracle"}) {
      std::string used = requested;
      std::optional<ControlLaw> law;
      try {
        law = resolve_control(problem, requested, bundle->grid());
      } catch (const OracleError&) {
        used = "feedback:sign";  // random terminal data: no enumeration oracle
        law = resolve_control(problem, used, bundle->grid());
      }
      const auto direct = evaluate_cost(problem.spec, *law, solve_bsde(problem.spec, *law, bundle, s.regression));
      const auto restricted = restricted_cost(aug, solve_bsde(aug.spec, *law, bundle, s.regression));
      const double diff = std::abs(restricted.value - direct.value);
      const double tol = std::max(3.0 * combined_standard_error(direct, restricted), 1e-10 * (1.0 + std::abs(direct.value)));
      const bool ok = diff <= tol;
      pass = pass && ok;
      worst_ratio = std::max(worst_ratio, diff / tol);
      results.push_back({{"problem", name},
                         {"control", used},
                         {"requested", requested},
                         {"J", direct.value},
                         {"J_stderr", direct.standard_error},
                         {"J_restricted", restricted.value},
                         {"J_restricted_stderr", restricted.standard_error},
                         {"abs_diff", diff},
                         {"tolerance", tol},
                         {"pass", ok}});
    }
  }
  return finish(2, title, pass, "9 comparisons, worst |diff|/tol=" + g3(worst_ratio), results,
                metadata_json(suite_meta(s, s.steps, s.paths)));
}

CriterionResult hamiltonian_reduction(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "Hamiltonian reduction and restricted adjoint";
  Json results;
  double worst_h = 0.0;
  std::mt19937_64 rng(mix_seed(s.seed, 3));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& name : problem_names()) {
    const auto problem = get_problem(name);
    const auto aug = augment_problem(problem.spec);
    const int n = problem.spec.dims.n;
    for (const auto& pt : sample_points(aug.spec, 10000, mix_seed(s.seed, 31))) {
      Vec p(n + 1);
      for (int j = 0; j < n; ++j) p[j] = 2.0 * normal(rng);
      p[n] = -1.0;
      const double extended = hamiltonian(aug.spec, pt.t, pt.y, pt.z, p, pt.v);
      const double strict = hamiltonian(problem.spec, pt.t, pt.y.head(n), pt.z.topRows(n), p.head(n), pt.v);
      worst_h = std::max(worst_h, std::abs(extended - strict));
    }
  }
  results["points_per_problem"] = 10000;
  results["max_abs_hamiltonian_difference"] = worst_h;

  const auto problem = get_problem("P1");
  const auto bundle = make_bundle(problem.spec, s.steps, s.paths, s.seed);
  const auto aug = augment_problem(problem.spec);
  const auto law = resolve_control(problem, "feedback:sign", bundle->grid());
  const auto traj = solve_bsde(aug.spec, law, bundle, s.regression);
  const auto adj = solve_adjoint(aug.spec, law, traj);
  double drift = 0.0;
  for (int m = 0; m < adj.paths(); ++m)
    for (int i = 0; i <= adj.steps(); ++i) drift = std::max(drift, std::abs(adj.p(m, i)[1] + 1.0));
  bool reduced = true;
  try {
    (void)reduce_adjoint(adj, 1e-10);
  } catch (const InvariantViolation&) {
    reduced = false;
  }
  results["restricted_adjoint_control"] = "feedback:sign";
  results["max_abs_cost_component_drift"] = drift;
  results["reduction_invariant_holds"] = reduced;
  const bool pass = worst_h <= 1e-10 && drift <= 1e-10 && reduced;
  return finish(3, title, pass, "max|H~ - H|=" + g3(worst_h) + ", max|p~_x + 1|=" + g3(drift), results,
                metadata_json(suite_meta(s, s.steps, s.paths, "P1")));
}

CriterionResult spike_rates(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "spike variation rates";
  const auto problem = get_problem("P1");
  const auto bundle = make_bundle(problem.spec, s.steps, s.paths, s.seed);
  const auto law = resolve_control(problem, "builtin", bundle->grid());
  const auto study = spike_convergence_study(problem.spec, law, 0.5, Vec::Constant(1, 1.0),
                                             {0.25, 0.125, 0.0625, 0.03125}, bundle, s.regression);
  Json rows = Json::array();
  for (const auto& r : study.rows)
    rows.push_back({{"theta", r.width}, {"y_moment", r.y_moment}, {"z_moment", r.z_moment}});
  Json results;
  results["base_control"] = law.label();
  results["tau"] = 0.5;
  results["replacement"] = 1.0;
  results["rows"] = rows;
  results["y_slope"] = study.y_slope;
  results["z_slope"] = study.z_slope;
  auto in_band = [](double x) { return x >= 1.7 && x <= 2.3; };
  const bool pass = in_band(study.y_slope) && in_band(study.z_slope);
  return finish(4, title, pass, "y_slope=" + g3(study.y_slope) + " z_slope=" + g3(study.z_slope), results,
                metadata_json(suite_meta(s, s.steps, s.paths, "P1")));
}

CriterionResult strict_necessary(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "strict maximum condition on the oracle optimum";
  const auto problem = get_problem("P0");
  const auto params = *problem.oracle;
  const auto oracle = brute_force_optimum(problem.spec, params);
  const int steps = params.fine_steps();
  const int paths = fine_paths(s);
  const auto bundle = make_bundle(problem.spec, steps, paths, s.seed);
  const CheckOptions options{-1.0, params.blocks};

  auto run = [&](const ControlLaw& law) {
    const auto traj = solve_bsde(problem.spec, law, bundle, s.regression);
    const auto adj = solve_adjoint(problem.spec, law, traj);
    return std::make_pair(evaluate_cost(problem.spec, law, traj), check_necessary(problem.spec, law, traj, adj, oracle.atoms, options));
  };

  Json results;
  Json pattern = Json::array();
  for (const auto& v : oracle.pattern) pattern.push_back(v[0]);
  const auto law = oracle_law(problem.spec, oracle, bundle->grid());
  const auto [oracle_cost, oracle_report] = run(law);
  results["oracle"] = {{"blocks", params.blocks},
                       {"atoms", oracle.atoms.size()},
                       {"substeps", params.substeps},
                       {"value", oracle.value},
                       {"pattern", pattern},
                       {"solver_cost", oracle_cost.value},
                       {"grid_gap", std::abs(oracle_cost.value - oracle.value)},
                       {"report", to_json(oracle_report)}};
  bool pass = oracle_report.pass;
  Json constants = Json::array();
  for (double c : {-1.0, 0.0, 1.0}) {
    const auto [cost, report] = run(constant_law(problem.spec.controls, Vec::Constant(1, c)));
    const bool fails = !report.pass && report.mean_gap >= 10.0 * report.tolerance;
    pass = pass && fails;
    constants.push_back({{"value", c}, {"cost", cost.value}, {"mean_gap", report.mean_gap},
                         {"tolerance", report.tolerance}, {"verdict", report.pass ? "pass" : "fail"},
                         {"fails_by_10x", fails}});
  }
  results["constants"] = constants;
  return finish(5, title, pass,
                "oracle mean_gap=" + g3(oracle_report.mean_gap) + " tol=" + g3(oracle_report.tolerance) +
                    "; constants fail by >=10x: " + (pass ? "yes" : "no"),
                results, metadata_json(suite_meta(s, steps, paths, "P0")));
}

CriterionResult sufficiency(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "sufficiency hypotheses";
  const auto spec = get_problem("P2").spec;
  const auto good = check_sufficient_assumptions(spec, 1000, s.seed);
  const auto mutant = check_sufficient_assumptions(negate_running_cost(spec), 1000, s.seed);
  Json results;
  results["P2"] = to_json(good);
  results["P2_negated_h"] = to_json(mutant);
  const bool pass = good.pass && !mutant.pass;
  return finish(6, title, pass,
                "P2 concavity defect=" + g3(good.concavity_defect) + " (pass), mutant defect=" +
                    g3(mutant.concavity_defect) + (mutant.pass ? " (pass)" : " (fail)"),
                results, metadata_json(suite_meta(s, 0, 0, "P2")));
}

RelaxedControlLaw half_half(const ProblemSpec& spec) {
  return constant_relaxed(spec.controls.atom_list(), Vec::Constant(2, 0.5));
}

const std::vector<int> kLevels = {4, 16, 64};

CriterionResult chattering_stability(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "chattering stability";
  const auto spec = get_problem("P2").spec;
  const int paths = fine_paths(s);
  const auto bundle = make_bundle(spec, s.fine_steps, paths, s.seed);
  const auto study = chattering_convergence_study(spec, half_half(spec), kLevels, bundle, s.regression);
  Json rows = Json::array();
  std::vector<double> ys, zs, cs;
  for (const auto& r : study.rows) {
    rows.push_back({{"level", r.level}, {"y_moment", r.y_moment}, {"z_moment", r.z_moment},
                    {"cost_gap", r.cost_gap}, {"strict_cost", r.strict_cost}});
    ys.push_back(r.y_moment);
    zs.push_back(r.z_moment);
    cs.push_back(r.cost_gap);
  }
  const double first = study.rows.front().strict_cost;
  const double last = study.rows.back().strict_cost;
  const bool columns = non_increasing(ys) && non_increasing(zs) && non_increasing(cs);
  const bool decay = last <= std::max(0.05 * first, 1e-2);
  const bool relaxed_zero = std::abs(study.relaxed.value) <= 1e-10;
  Json results;
  results["relaxed_cost"] = study.relaxed.value;
  results["rows"] = rows;
  results["columns_non_increasing"] = columns;
  results["final_cost_bound"] = std::max(0.05 * first, 1e-2);
  results["final_cost_within_bound"] = decay;
  return finish(7, title, columns && decay && relaxed_zero,
                "J(u^4)=" + g3(first) + " J(u^64)=" + g3(last) + " relaxed=" + g3(study.relaxed.value), results,
                metadata_json(suite_meta(s, s.fine_steps, paths, "P2")));
}

CriterionResult stable_convergence(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "stable-convergence diagnostic";
  const auto spec = get_problem("P2").spec;
  const int paths = fine_paths(s);
  const auto bundle = make_bundle(spec, s.fine_steps, paths, s.seed);
  const std::vector<TestFunction> fns = {[](double, CVecRef a) { return a[0]; },
                                         [](double t, CVecRef) { return t * t; }};
  const auto rows = stable_convergence_diagnostic(half_half(spec), kLevels, fns, *bundle);
  Json table = Json::array();
  std::vector<double> identity_gaps;
  double control_free = 0.0;
  for (const auto& r : rows) {
    table.push_back({{"level", r.level}, {"function", r.function == 0 ? "a" : "t^2"}, {"gap", r.gap}});
    if (r.function == 0) {
      identity_gaps.push_back(r.gap);
    } else {
      control_free = std::max(control_free, r.gap);
    }
  }
  bool halves = true;
  for (std::size_t j = 1; j < identity_gaps.size(); ++j) halves = halves && identity_gaps[j] <= 0.5 * identity_gaps[j - 1];
  Json results;
  results["rows"] = table;
  results["halving_per_level"] = halves;
  results["control_free_max_gap"] = control_free;
  std::string summary = "gaps(f=a)=";
  for (std::size_t j = 0; j < identity_gaps.size(); ++j) summary += (j ? "," : "") + g3(identity_gaps[j]);
  return finish(8, title, halves, summary, results, metadata_json(suite_meta(s, s.fine_steps, paths, "P2")));
}

CriterionResult adjoint_convergence(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "adjoint convergence along chattering";
  const auto spec = get_problem("P2").spec;
  const int paths = fine_paths(s);
  const auto bundle = make_bundle(spec, s.fine_steps, paths, s.seed);
  const auto study = chattering_convergence_study(spec, half_half(spec), kLevels, bundle, s.regression);
  Json rows = Json::array();
  std::vector<double> ps;
  for (const auto& r : study.rows) {
    rows.push_back({{"level", r.level}, {"p_moment", r.p_moment}, {"b_y_gap", r.b_y_gap}, {"b_z_gap", r.b_z_gap},
                    {"h_y_gap", r.h_y_gap}, {"h_z_gap", r.h_z_gap}});
    ps.push_back(r.p_moment);
  }
  const bool pass = non_increasing(ps) && ps.back() <= 1e-2;
  Json results;
  results["rows"] = rows;
  return finish(9, title, pass, "E sup|p^n - p^mu|^2 at n=64: " + g3(ps.back()), results,
                metadata_json(suite_meta(s, s.fine_steps, paths, "P2")));
}

CriterionResult relaxed_necessary(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "relaxed maximum condition";
  const auto p2 = get_problem("P2");
  const auto& spec = p2.spec;
  const auto bundle = make_bundle(spec, s.steps, s.paths, s.seed);
  const auto atoms = spec.controls.atom_list();
  const auto candidates = spec.controls.grid();

  const auto mu = half_half(spec);
  const auto mu_traj = solve_relaxed_bsde(spec, mu, bundle, s.regression);
  const auto mu_report = check_relaxed_necessary(spec, mu, mu_traj, solve_relaxed_adjoint(spec, mu, mu_traj), candidates);

  const auto plus = constant_law(spec.controls, Vec::Constant(1, 1.0));
  const auto dirac = embed_strict(plus, atoms);
  const auto dirac_traj = solve_relaxed_bsde(spec, dirac, bundle, s.regression);
  const auto dirac_report =
      check_relaxed_necessary(spec, dirac, dirac_traj, solve_relaxed_adjoint(spec, dirac, dirac_traj), candidates);
  const bool dirac_fails = !dirac_report.pass && dirac_report.mean_gap >= 10.0 * dirac_report.tolerance;

  // Dirac embedding against the strict pipeline, on a deterministic and a
  // state-dependent control.
  Json consistency = Json::array();
  bool consistent = true;
  for (const auto& [name, control] : {std::pair<std::string, std::string>{"P2", "const:+1"}, {"P1", "feedback:sign"}}) {
    const auto problem = get_problem(name);
    const auto b = make_bundle(problem.spec, s.steps, s.paths, s.seed);
    const auto law = resolve_control(problem, control, b->grid());
    const auto q = embed_strict(law, problem.spec.controls.atom_list());
    const auto strict_traj = solve_bsde(problem.spec, law, b, s.regression);
    const auto relaxed_traj = solve_relaxed_bsde(problem.spec, q, b, s.regression);
    const auto strict_adj = solve_adjoint(problem.spec, law, strict_traj);
    const auto relaxed_adj = solve_relaxed_adjoint(problem.spec, q, relaxed_traj);
    const double cost_diff = std::abs(evaluate_cost(problem.spec, law, strict_traj).value -
                                      relaxed_cost(problem.spec, q, relaxed_traj).value);
    const auto grid_values = problem.spec.controls.grid();
    const auto strict_check = check_necessary(problem.spec, law, strict_traj, strict_adj, grid_values);
    const auto relaxed_check = check_relaxed_necessary(problem.spec, q, relaxed_traj, relaxed_adj, grid_values);
    const double traj_diff = max_abs_diff(strict_traj, relaxed_traj);
    const double adj_diff = max_abs_diff(strict_adj, relaxed_adj);
    const double gap_diff = std::abs(strict_check.mean_gap - relaxed_check.mean_gap);
    const bool ok = traj_diff <= 1e-12 && adj_diff <= 1e-12 && cost_diff <= 1e-12 && gap_diff <= 1e-12 &&
                    strict_check.pass == relaxed_check.pass;
    consistent = consistent && ok;
    consistency.push_back({{"problem", name}, {"control", control}, {"max_state_diff", traj_diff},
                           {"max_adjoint_diff", adj_diff}, {"cost_diff", cost_diff}, {"mean_gap_diff", gap_diff},
                           {"strict_verdict", strict_check.pass ? "pass" : "fail"},
                           {"relaxed_verdict", relaxed_check.pass ? "pass" : "fail"}, {"pass", ok}});
  }
  Json results;
  results["half_half"] = to_json(mu_report);
  results["dirac_plus_one"] = to_json(dirac_report);
  results["dirac_consistency"] = consistency;
  const bool pass = mu_report.pass && dirac_fails && consistent;
  return finish(10, title, pass,
                "mu=(1/2,1/2) mean_gap=" + g3(mu_report.mean_gap) + " (" + (mu_report.pass ? "pass" : "fail") +
                    "), Dirac(+1) mean_gap=" + g3(dirac_report.mean_gap) + ", embedding consistent: " +
                    (consistent ? "yes" : "no"),
                results, metadata_json(suite_meta(s, s.steps, s.paths, "P2")));
}

CriterionResult near_optimality(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "near-optimality structure";
  const auto spec = get_problem("P2").spec;
  const int paths = fine_paths(s);
  const auto bundle = make_bundle(spec, s.fine_steps, paths, s.seed);
  const auto report = near_optimality_check(spec, half_half(spec), kLevels, bundle, s.regression, spec.controls.grid());
  Json rows = Json::array();
  for (const auto& l : report.levels) {
    rows.push_back({{"level", l.level}, {"epsilon", l.epsilon}, {"epsilon_raw", l.epsilon_raw},
                    {"epsilon_stderr", l.epsilon_stderr}, {"clamped", l.clamped},
                    {"mean_gap", l.gaps.mean_gap}, {"max_gap", l.gaps.max_gap},
                    {"ratio_max_gap_to_epsilon", std::isfinite(l.ratio) ? Json(l.ratio) : Json(nullptr)}});
  }
  Json results;
  results["rows"] = rows;
  results["epsilon_decreasing"] = report.epsilon_decreasing;
  results["gap_decreasing"] = report.gap_decreasing;
  results["ratio_spread"] = report.ratio_spread;
  results["ratio_bound"] = 10.0;
  const bool pass = report.epsilon_decreasing && report.gap_decreasing && report.ratio_bounded;
  return finish(11, title, pass,
                std::string("eps decreasing: ") + (report.epsilon_decreasing ? "yes" : "no") +
                    ", gap decreasing: " + (report.gap_decreasing ? "yes" : "no") +
                    ", max/min ratio=" + g3(report.ratio_spread) + " (bound 10)",
                results, metadata_json(suite_meta(s, s.fine_steps, paths, "P2")));
}

CriterionResult metric_axioms(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "control metric";
  const auto problem = get_problem("P1");
  const auto bundle = make_bundle(problem.spec, s.steps, s.paths, s.seed);
  const auto& grid = bundle->grid();
  const auto plus = resolve_control(problem, "const:+1", grid);
  const double theta = 0.25;
  const auto spiked = spike_perturb(plus, SpikeSpec{0.5, theta, Vec::Constant(1, -1.0)}, grid);
  const auto chatter = chattering_sequence(
      constant_relaxed({Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)}, Vec::Constant(2, 0.5)), 4, grid);
  const std::vector<ControlLaw> laws = {resolve_control(problem, "const:-1", grid), plus,
                                        resolve_control(problem, "feedback:sign", grid), spiked, chatter.law};
  const std::size_t L = laws.size();
  std::vector<double> d(L * L);
  for (std::size_t a = 0; a < L; ++a)
    for (std::size_t b = 0; b < L; ++b) d[a * L + b] = control_distance(laws[a], laws[b], *bundle);
  bool identity = true, symmetric = true, triangle = true;
  for (std::size_t a = 0; a < L; ++a) {
    identity = identity && d[a * L + a] == 0.0;
    for (std::size_t b = 0; b < L; ++b) {
      symmetric = symmetric && d[a * L + b] == d[b * L + a];
      for (std::size_t c = 0; c < L; ++c) triangle = triangle && d[a * L + c] <= d[a * L + b] + d[b * L + c];
    }
  }
  const double spike_distance = d[1 * L + 3];
  const double opposite = d[0 * L + 1];
  Json labels = Json::array();
  for (const auto& law : laws) labels.push_back(law.label());
  Json matrix = Json::array();
  for (std::size_t a = 0; a < L; ++a) {
    Json row = Json::array();
    for (std::size_t b = 0; b < L; ++b) row.push_back(d[a * L + b]);
    matrix.push_back(row);
  }
  Json results;
  results["laws"] = labels;
  results["distances"] = matrix;
  results["identity"] = identity;
  results["symmetry"] = symmetric;
  results["triangle"] = triangle;
  results["spike_width"] = theta;
  results["spike_distance"] = spike_distance;
  results["opposite_constants_distance"] = opposite;
  const bool pass = identity && symmetric && triangle && spike_distance == theta && opposite == 1.0;
  return finish(12, title, pass, "axioms exact: " + std::string(identity && symmetric && triangle ? "yes" : "no") +
                                     ", spike distance=" + format_number(spike_distance),
                results, metadata_json(suite_meta(s, s.steps, s.paths, "P1")));
}

double hamiltonian_fd_error(const ProblemSpec& spec, const SamplePoint& pt, const Vec& p) {
  const auto partials = hamiltonian_partials(spec, pt.t, pt.y, pt.z, p, pt.v);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < pt.y.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(pt.y[j]));
    Vec up = pt.y, down = pt.y;
    up[j] += h;
    down[j] -= h;
    const double fd = (hamiltonian(spec, pt.t, up, pt.z, p, pt.v) - hamiltonian(spec, pt.t, down, pt.z, p, pt.v)) / (2 * h);
    worst = std::max(worst, fd_relative_error(partials.dy[j], fd));
  }
  for (Eigen::Index c = 0; c < pt.z.size(); ++c) {
    const double h = 1e-6 * std::max(1.0, std::abs(pt.z.data()[c]));
    Mat up = pt.z, down = pt.z;
    up.data()[c] += h;
    down.data()[c] -= h;
    const double fd = (hamiltonian(spec, pt.t, pt.y, up, p, pt.v) - hamiltonian(spec, pt.t, pt.y, down, p, pt.v)) / (2 * h);
    worst = std::max(worst, fd_relative_error(partials.dz.data()[c], fd));
  }
  return worst;
}

CriterionResult gradient_checks(const SuiteSettings& s, SuiteContext&) {
  const std::string title = "gradient checks";
  Json results = Json::array();
  bool pass = true;
  double worst_all = 0.0;
  std::mt19937_64 rng(mix_seed(s.seed, 13));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& name : problem_names()) {
    const auto problem = get_problem(name);
    const auto aug = augment_problem(problem.spec);
    for (const auto* spec : {&problem.spec, &aug.spec}) {
      Json entry;
      entry["problem"] = spec->name;
      bool ok = true;
      try {
        const auto report = validate_spec(*spec, 100, s.seed, 1e-6);
        Json partials;
        for (const auto& [key, value] : report.max_relative_error) partials[key] = value;
        entry["coefficient_partials"] = partials;
        entry["flags"] = report.flags;
        worst_all = std::max(worst_all, report.worst);
      } catch (const GradientMismatchError& e) {
        ok = false;
        entry["error"] = e.what();
      }
      double worst_h = 0.0;
      for (const auto& pt : sample_points(*spec, 100, mix_seed(s.seed, 131))) {
        Vec p(spec->dims.n);
        for (auto& x : p) x = 2.0 * normal(rng);
        worst_h = std::max(worst_h, hamiltonian_fd_error(*spec, pt, p));
      }
      entry["hamiltonian_partials"] = worst_h;
      worst_all = std::max(worst_all, worst_h);
      ok = ok && worst_h <= 1e-6;
      entry["pass"] = ok;
      pass = pass && ok;
      results.push_back(entry);
    }
  }
  return finish(13, title, pass, "worst relative error=" + g3(worst_all) + " (bound 1e-6)", results,
                metadata_json(suite_meta(s, 0, 0)));
}

CriterionResult determinism(const SuiteSettings& s, SuiteContext& ctx);

const std::vector<Criterion>& registry() {
  static const std::vector<Criterion> criteria = {
      {1, "BSDE solver against closed forms", closed_form_solver},
      {2, "cost-restriction identity", restriction_identity},
      {3, "Hamiltonian reduction and restricted adjoint", hamiltonian_reduction},
      {4, "spike variation rates", spike_rates},
      {5, "strict maximum condition on the oracle optimum", strict_necessary},
      {6, "sufficiency hypotheses", sufficiency},
      {7, "chattering stability", chattering_stability},
      {8, "stable-convergence diagnostic", stable_convergence},
      {9, "adjoint convergence along chattering", adjoint_convergence},
      {10, "relaxed maximum condition", relaxed_necessary},
      {11, "near-optimality structure", near_optimality},
      {12, "control metric", metric_axioms},
      {13, "gradient checks", gradient_checks},
      {14, "determinism across worker counts", determinism},
  };
  return criteria;
}

CriterionResult determinism(const SuiteSettings& s, SuiteContext& ctx) {
  const std::string title = "determinism across worker counts";
  const int original = worker_count();
  const int alternate = original == 1 ? 3 : 1;
  Json results = Json::array();
  bool pass = true;
  for (const auto& c : registry()) {
    if (c.id == 14) continue;
    SuiteContext scratch;
    auto first = ctx.artifacts.count(c.id) ? ctx.artifacts.at(c.id) : c.run(s, scratch).artifact;
    set_worker_count(alternate);
    std::string second;
    try {
      second = c.run(s, scratch).artifact;
    } catch (...) {
      set_worker_count(original);
      throw;
    }
    set_worker_count(original);
    const bool same = first == second;
    pass = pass && same;
    results.push_back({{"criterion", c.id}, {"bytes", first.size()}, {"identical", same}});
  }
  return finish(14, title, pass, std::string("criteria 1-13 byte-identical across worker counts: ") + (pass ? "yes" : "no"),
                results, metadata_json(suite_meta(s, s.steps, s.paths)));
}

}  // namespace

const std::vector<Criterion>& acceptance_criteria() { return registry(); }

std::vector<CriterionResult> run_suite(const SuiteSettings& settings, const std::vector<int>& only,
                                       const std::function<void(const CriterionResult&)>& on_result) {
  SuiteContext ctx;
  std::vector<CriterionResult> out;
  for (const auto& c : registry()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    auto result = c.run(settings, ctx);
    ctx.artifacts[c.id] = result.artifact;
    if (on_result) on_result(result);
    out.push_back(std::move(result));
  }
  return out;
}

}  // namespace bsmp
