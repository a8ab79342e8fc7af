// Command-line front end. Talks to the library through the C interface only.
#include "bsmp/bsmp.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

// Configuration-type failures exit with 2, failed verdicts with 1.
struct Failure {
  int exit_code;
  std::string message;
};

void ok(bsmp_status status) {
  if (status == BSMP_OK) return;
  const bool config = status == BSMP_ERR_CONFIG || status == BSMP_ERR_ORACLE || status == BSMP_ERR_GRADIENT ||
                      status == BSMP_ERR_IO;
  throw Failure{config ? 2 : 1, bsmp_last_error()};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Problem = std::unique_ptr<bsmp_problem, Deleter<bsmp_problem, bsmp_problem_free>>;
using Bundle = std::unique_ptr<bsmp_bundle, Deleter<bsmp_bundle, bsmp_bundle_free>>;
using Control = std::unique_ptr<bsmp_control, Deleter<bsmp_control, bsmp_control_free>>;
using Traj = std::unique_ptr<bsmp_trajectory, Deleter<bsmp_trajectory, bsmp_trajectory_free>>;
using Adjoint = std::unique_ptr<bsmp_adjoint, Deleter<bsmp_adjoint, bsmp_adjoint_free>>;

struct Text {
  char* ptr = nullptr;
  ~Text() { bsmp_string_free(ptr); }
  char** out() { return &ptr; }
  std::string str() const { return ptr ? ptr : ""; }
};

struct RunConfig {
  std::string problem = "P0";
  std::string control = "builtin";
  int steps = 64;
  int paths = 20000;
  std::uint64_t seed = 7;
  int degree = 3;
  double ridge = -1.0;
  int resolution = 0;
  int blocks = -1;
  int substeps = 0;
  std::string thetas = "0.25,0.125,0.0625,0.03125";
  std::string levels = "4,16,64";
  std::string weights;
  double tau = 0.5;
  std::string spike_value = "1";
  int iterations = 10;
  double tolerance = -1.0;
  int samples = 1000;
  std::string out;
  int threads = 0;
  int export_paths = 100;
  std::string only;
};

std::vector<double> parse_doubles(const std::string& text, const char* flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Failure{2, std::string("malformed number '") + item + "' in " + flag};
    }
  }
  if (values.empty()) throw Failure{2, std::string(flag) + " needs at least one value"};
  return values;
}

std::vector<int> parse_ints(const std::string& text, const char* flag) {
  std::vector<int> out;
  for (double v : parse_doubles(text, flag)) {
    if (v != static_cast<int>(v)) throw Failure{2, std::string(flag) + " expects integers"};
    out.push_back(static_cast<int>(v));
  }
  return out;
}

class Session {
 public:
  Session(RunConfig& cfg, bool grid_given) : cfg_(cfg) {
    bsmp_problem* p = nullptr;
    ok(bsmp_problem_open(cfg.problem.c_str(), &p));
    problem_.reset(p);
    if (cfg.blocks > 0 || cfg.resolution > 0 || cfg.substeps > 0) {
      ok(bsmp_problem_set_oracle(problem_.get(), cfg.blocks, cfg.resolution, cfg.substeps));
    }
    // Oracle optima are piecewise constant on the oracle's own fine grid;
    // evaluate them there unless a grid was requested.
    if (cfg.control == "oracle" && !grid_given) ok(bsmp_problem_oracle_steps(problem_.get(), &cfg.steps));
  }

  bsmp_problem* problem() { return problem_.get(); }

  bsmp_bundle* bundle() {
    if (!bundle_) {
      bsmp_bundle* b = nullptr;
      ok(bsmp_bundle_sample(problem_.get(), cfg_.steps, cfg_.paths, cfg_.seed, &b));
      bundle_.reset(b);
    }
    return bundle_.get();
  }

  bsmp_regression regression() const { return bsmp_regression{cfg_.degree, cfg_.ridge}; }

  Control strict_control() {
    bsmp_control* c = nullptr;
    ok(bsmp_control_resolve(problem_.get(), bundle(), cfg_.control.c_str(), &c));
    return Control(c);
  }

  // --weights, else the Dirac embedding of an explicit --control, else the
  // problem's reference weights.
  Control relaxed_control(bool control_given) {
    bsmp_control* c = nullptr;
    if (!cfg_.weights.empty()) {
      const auto w = parse_doubles(cfg_.weights, "--weights");
      ok(bsmp_control_relaxed(problem_.get(), w.data(), w.size(), &c));
    } else if (control_given) {
      auto strict = strict_control();
      ok(bsmp_control_embed(strict.get(), &c));
    } else {
      std::size_t count = 0;
      ok(bsmp_problem_relaxed_weights(problem_.get(), nullptr, 0, &count));
      if (count == 0) throw Failure{2, cfg_.problem + " has no reference relaxed control; pass --weights"};
      std::vector<double> w(count);
      ok(bsmp_problem_relaxed_weights(problem_.get(), w.data(), w.size(), &count));
      ok(bsmp_control_relaxed(problem_.get(), w.data(), w.size(), &c));
    }
    return Control(c);
  }

  Traj solve(bsmp_control* control) {
    bsmp_trajectory* t = nullptr;
    ok(bsmp_solve(control, bundle(), regression(), &t));
    return Traj(t);
  }

  Adjoint adjoint(bsmp_trajectory* traj) {
    bsmp_adjoint* a = nullptr;
    ok(bsmp_adjoint_solve(traj, &a));
    return Adjoint(a);
  }

 private:
  RunConfig& cfg_;
  Problem problem_;
  Bundle bundle_;
};

// Without --out, reports go to stdout. With --out, it names a directory that
// receives one file per artifact.
class Sink {
 public:
  explicit Sink(std::string dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(dir_, ec);
      if (ec) throw Failure{2, "cannot create output directory " + dir_ + ": " + ec.message()};
    }
  }

  void put(const std::string& name, const std::string& content, bool print_without_out = true) {
    if (dir_.empty()) {
      if (print_without_out) std::fputs(content.c_str(), stdout);
      return;
    }
    const auto path = (std::filesystem::path(dir_) / name).string();
    ok(bsmp_write_file(path.c_str(), content.c_str()));
  }

  bool to_files() const { return !dir_.empty(); }

 private:
  std::string dir_;
};

Control any_control(Session& s, const RunConfig& cfg) {
  return cfg.weights.empty() ? s.strict_control() : s.relaxed_control(false);
}

int run_command(const std::string& command, RunConfig& cfg, bool control_given, bool grid_given) {
  Session s(cfg, grid_given);
  Sink sink(cfg.out);
  const auto reg = s.regression();
  Text report;

  if (command == "solve") {
    auto control = any_control(s, cfg);
    auto traj = s.solve(control.get());
    ok(bsmp_cost_json(traj.get(), report.out()));
    sink.put("cost.json", report.str());
    if (sink.to_files()) {
      Text csv;
      ok(bsmp_trajectory_csv(traj.get(), cfg.export_paths, csv.out()));
      sink.put("trajectory.csv", csv.str());
    }
    return 0;
  }
  if (command == "adjoint") {
    auto control = any_control(s, cfg);
    auto traj = s.solve(control.get());
    auto adj = s.adjoint(traj.get());
    ok(bsmp_adjoint_csv(adj.get(), cfg.export_paths, report.out()));
    sink.put("adjoint.csv", report.str());
    return 0;
  }
  if (command == "check" || command == "check-relaxed") {
    auto control = command == "check" ? s.strict_control() : s.relaxed_control(control_given);
    auto traj = s.solve(control.get());
    auto adj = s.adjoint(traj.get());
    int pass = 0;
    ok(bsmp_check_json(adj.get(), cfg.tolerance, cfg.blocks, cfg.resolution, &pass, report.out()));
    sink.put(command + ".json", report.str());
    return pass ? 0 : 1;
  }
  if (command == "spike-study") {
    auto control = s.strict_control();
    const auto thetas = parse_doubles(cfg.thetas, "--thetas");
    const auto value = parse_doubles(cfg.spike_value, "--spike-value");
    ok(bsmp_spike_study_json(control.get(), s.bundle(), reg, cfg.tau, value.data(), value.size(), thetas.data(),
                             thetas.size(), report.out()));
    sink.put("spike-study.json", report.str());
    return 0;
  }
  if (command == "chattering-study" || command == "stable-study") {
    auto control = s.relaxed_control(control_given);
    const auto levels = parse_ints(cfg.levels, "--levels");
    if (command == "chattering-study") {
      ok(bsmp_chattering_study_json(control.get(), s.bundle(), reg, levels.data(), levels.size(), report.out()));
    } else {
      ok(bsmp_stable_study_json(control.get(), s.bundle(), levels.data(), levels.size(), report.out()));
    }
    sink.put(command + ".json", report.str());
    return 0;
  }
  if (command == "improve") {
    auto control = s.strict_control();
    ok(bsmp_improve_json(control.get(), s.bundle(), reg, cfg.iterations, cfg.resolution, report.out()));
    sink.put("improve.json", report.str());
    return 0;
  }
  if (command == "oracle") {
    ok(bsmp_oracle_json(s.problem(), report.out()));
    sink.put("oracle.json", report.str());
    return 0;
  }
  if (command == "restrict-verify") {
    auto control = s.strict_control();
    int pass = 0;
    ok(bsmp_restrict_verify_json(control.get(), s.bundle(), reg, &pass, report.out()));
    sink.put("restrict-verify.json", report.str());
    return pass ? 0 : 1;
  }
  if (command == "sufficiency") {
    int pass = 0;
    ok(bsmp_sufficiency_json(s.problem(), cfg.samples, cfg.seed, !cfg.weights.empty(), &pass, report.out()));
    sink.put("sufficiency.json", report.str());
    return pass ? 0 : 1;
  }
  throw Failure{2, "unknown command " + command};
}

struct SuiteState {
  Sink* sink;
  std::string matrix;
  bool io_failed = false;
  std::string io_error;
};

void on_criterion(int id, int pass, const char* title, const char* summary, const char* artifact, void* user) {
  auto* state = static_cast<SuiteState*>(user);
  char line[512];
  std::snprintf(line, sizeof(line), "%s  %2d  %-48s %s\n", pass ? "PASS" : "FAIL", id, title, summary);
  std::fputs(line, stdout);
  std::fflush(stdout);
  state->matrix += line;
  if (state->sink->to_files()) {
    char name[32];
    std::snprintf(name, sizeof(name), "criterion_%02d.json", id);
    try {
      state->sink->put(name, artifact);
    } catch (const Failure& f) {
      state->io_failed = true;
      state->io_error = f.message;
    }
  }
}

int run_suite(const RunConfig& cfg) {
  Sink sink(cfg.out);
  SuiteState state{&sink, {}, false, {}};
  const std::vector<int> only = cfg.only.empty() ? std::vector<int>{} : parse_ints(cfg.only, "--only");
  int failures = 0;
  ok(bsmp_suite_run(cfg.seed, only.data(), only.size(), on_criterion, &state, &failures));
  if (state.io_failed) throw Failure{2, state.io_error};
  sink.put("suite.txt", state.matrix, false);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo solver and maximum-principle checks for controlled BSDEs"};
  app.set_version_flag("--version", bsmp_version());
  app.require_subcommand(1);
  RunConfig cfg;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"solve", "solve the state equation; cost JSON and trajectory CSV"},
      {"adjoint", "solve state and adjoint equations; adjoint CSV"},
      {"check", "pointwise maximum condition of a strict control"},
      {"check-relaxed", "maximum condition of a relaxed control"},
      {"spike-study", "moment rates of spike variations"},
      {"chattering-study", "strict chattering approximations of a relaxed control"},
      {"stable-study", "occupation-measure convergence of chattering controls"},
      {"improve", "iterate the Hamiltonian argmax from an initial control"},
      {"oracle", "brute-force optimum over piecewise-constant controls"},
      {"restrict-verify", "compare the direct cost with the cost-augmented terminal form"},
      {"sufficiency", "convexity and concavity hypotheses of the sufficient condition"},
      {"suite", "run every acceptance criterion"},
  };
  std::map<std::string, CLI::Option*> control_flags;
  std::map<std::string, CLI::Option*> grid_flags;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    sub->add_option("--out", cfg.out, "output directory (stdout when omitted)");
    sub->add_option("--threads", cfg.threads, "worker threads (default: BSMP_THREADS or 1)");
    if (name == "suite") {
      sub->add_option("--only", cfg.only, "comma-separated criterion ids");
      continue;
    }
    sub->add_option("--problem", cfg.problem, "P0, P1, P2, P3a or P3b")->capture_default_str();
    sub->add_option("--resolution", cfg.resolution, "points per axis of a box control grid (0: default)");
    sub->add_option("--blocks", cfg.blocks, "oracle blocks; for checks, block-averaged comparison");
    sub->add_option("--substeps", cfg.substeps, "oracle RK4 steps per block");
    if (name == "oracle") continue;
    sub->add_option("--weights", cfg.weights, "relaxed weights over the control grid, e.g. 0.5,0.5");
    if (name == "sufficiency") {
      sub->add_option("--samples", cfg.samples, "random midpoint pairs")->capture_default_str();
      continue;
    }
    control_flags[name] =
        sub->add_option("--control", cfg.control, "builtin | const:<v> | oracle | feedback:sign")->capture_default_str();
    grid_flags[name] = sub->add_option("--grid", cfg.steps, "time steps N")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--paths", cfg.paths, "Monte Carlo paths M")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--degree", cfg.degree, "regression degree D")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--ridge", cfg.ridge, "ridge weight (negative: automatic)")->capture_default_str();
    sub->add_option("--tol", cfg.tolerance, "check tolerance (negative: automatic)");
    sub->add_option("--export-paths", cfg.export_paths, "paths written to CSV (negative: all)")->capture_default_str();
    sub->add_option("--thetas", cfg.thetas, "spike widths")->capture_default_str();
    sub->add_option("--tau", cfg.tau, "spike start")->capture_default_str();
    sub->add_option("--spike-value", cfg.spike_value, "spike replacement value")->capture_default_str();
    sub->add_option("--levels", cfg.levels, "chattering levels")->capture_default_str();
    sub->add_option("--iterations", cfg.iterations, "ascent iterations")->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    if (cfg.threads > 0) bsmp_set_threads(cfg.threads);
    if (command == "suite") return run_suite(cfg);
    const auto flag = control_flags.find(command);
    const bool control_given = flag != control_flags.end() && flag->second->count() > 0;
    const auto grid = grid_flags.find(command);
    const bool grid_given = grid != grid_flags.end() && grid->second->count() > 0;
    return run_command(command, cfg, control_given, grid_given);
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.exit_code;
  }
}
