#include "bsmp/model.hpp"

#include "bsmp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace bsmp {

void Dimensions::validate() const {
  if (n < 1 || d < 1 || k < 1) {
    throw ConfigError("dimensions must be positive (n=" + std::to_string(n) + ", d=" +
                      std::to_string(d) + ", k=" + std::to_string(k) + ")");
  }
}

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ConfigError("time horizon must be positive, got " + std::to_string(horizon));
  }
  if (steps < 1) throw ConfigError("grid needs at least one step, got " + std::to_string(steps));
  dt_ = horizon / steps;
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> out(steps_ + 1);
  for (int i = 0; i <= steps_; ++i) out[i] = node(i);
  return out;
}

TimeGrid build_grid(double horizon, int steps) { return TimeGrid(horizon, steps); }

Eigen::Map<const Vec> PathView::at(int j) const {
  if (j < first_ || j > node_) {
    throw ConfigError("control law requested W at node " + std::to_string(j) +
                      " outside its adapted view [" + std::to_string(first_) + ", " +
                      std::to_string(node_) + "]");
  }
  return Eigen::Map<const Vec>(history_ + static_cast<std::size_t>(j - first_) * d_, d_);
}

PathView PathView::until(int j) const {
  if (j < first_ || j > node_) {
    throw ConfigError("cannot rewind adapted view to node " + std::to_string(j));
  }
  return PathView(history_, d_, first_, j);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

BrownianBundle::BrownianBundle(TimeGrid grid, int d, int paths, std::uint64_t seed)
    : grid_(grid), d_(d), paths_(paths), seed_(seed) {
  if (paths < 1) throw ConfigError("number of paths must be positive");
  if (d < 1) throw ConfigError("Brownian dimension must be positive");
  const int steps = grid_.steps();
  const double scale = std::sqrt(grid_.dt());
  dw_.resize(static_cast<std::size_t>(paths) * steps * d);
  w_.assign(static_cast<std::size_t>(paths) * (steps + 1) * d, 0.0);
  for (int m = 0; m < paths; ++m) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(m)));
    std::normal_distribution<double> normal(0.0, 1.0);
    double* inc = dw_.data() + static_cast<std::size_t>(m) * steps * d;
    double* cum = w_.data() + static_cast<std::size_t>(m) * (steps + 1) * d;
    for (int i = 0; i < steps; ++i) {
      for (int c = 0; c < d; ++c) {
        const double x = scale * normal(rng);
        inc[i * d + c] = x;
        cum[(i + 1) * d + c] = cum[i * d + c] + x;
      }
    }
  }
}

std::shared_ptr<const BrownianBundle> sample_brownian(const TimeGrid& grid, const Dimensions& dims,
                                                      int paths, std::uint64_t seed) {
  dims.validate();
  return std::make_shared<const BrownianBundle>(grid, dims.d, paths, seed);
}

// ---------------------------------------------------------------------------

ControlSet ControlSet::atoms(std::vector<Vec> atoms) {
  if (atoms.empty()) throw ConfigError("control atom list is empty");
  ControlSet set;
  set.kind_ = Kind::Atoms;
  set.dim_ = static_cast<int>(atoms.front().size());
  for (const auto& a : atoms) {
    if (a.size() != set.dim_) throw ConfigError("control atoms have inconsistent dimensions");
  }
  set.atoms_ = std::move(atoms);
  set.resolution_ = static_cast<int>(set.atoms_.size());
  return set;
}

ControlSet ControlSet::box(Vec lo, Vec hi, int resolution) {
  if (lo.size() != hi.size() || lo.size() == 0) throw ConfigError("box bounds mismatch");
  if ((hi - lo).minCoeff() < 0.0) throw ConfigError("box has lower bound above upper bound");
  if (resolution < 1) throw ConfigError("box grid resolution must be positive");
  ControlSet set;
  set.kind_ = Kind::Box;
  set.dim_ = static_cast<int>(lo.size());
  set.lo_ = std::move(lo);
  set.hi_ = std::move(hi);
  set.resolution_ = resolution;
  return set;
}

ControlSet ControlSet::simplex(int size) {
  if (size < 1) throw ConfigError("simplex needs at least one vertex");
  ControlSet set;
  set.kind_ = Kind::Simplex;
  set.dim_ = size;
  set.resolution_ = size;
  return set;
}

bool ControlSet::contains(CVecRef v, double tol) const {
  if (v.size() != dim_ || !v.allFinite()) return false;
  switch (kind_) {
    case Kind::Atoms:
      return atom_index(v, tol) >= 0;
    case Kind::Box:
      return ((v - lo_).array() >= -tol).all() && ((hi_ - v).array() >= -tol).all();
    case Kind::Simplex:
      return (v.array() >= -tol).all() && std::abs(v.sum() - 1.0) <= tol;
  }
  return false;
}

int ControlSet::atom_index(CVecRef v, double tol) const {
  for (std::size_t l = 0; l < atoms_.size(); ++l) {
    if ((atoms_[l] - v).cwiseAbs().maxCoeff() <= tol) return static_cast<int>(l);
  }
  return -1;
}

std::vector<Vec> ControlSet::grid(int resolution) const {
  switch (kind_) {
    case Kind::Atoms:
      return atoms_;
    case Kind::Simplex: {
      std::vector<Vec> vertices;
      for (int l = 0; l < dim_; ++l) vertices.push_back(Vec::Unit(dim_, l));
      return vertices;
    }
    case Kind::Box:
      break;
  }
  const int r = resolution > 0 ? resolution : resolution_;
  std::size_t total = 1;
  for (int c = 0; c < dim_; ++c) total *= static_cast<std::size_t>(r);
  std::vector<Vec> out;
  out.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vec v(dim_);
    std::size_t rem = idx;
    for (int c = dim_ - 1; c >= 0; --c) {
      const auto j = static_cast<int>(rem % static_cast<std::size_t>(r));
      rem /= static_cast<std::size_t>(r);
      v[c] = r == 1 ? 0.5 * (lo_[c] + hi_[c]) : lo_[c] + (hi_[c] - lo_[c]) * j / (r - 1);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string ControlSet::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Atoms:
      os << "atoms{";
      for (std::size_t l = 0; l < atoms_.size(); ++l) {
        if (l) os << ';';
        for (int c = 0; c < dim_; ++c) os << (c ? "," : "") << atoms_[l][c];
      }
      os << '}';
      break;
    case Kind::Box:
      os << "box[";
      for (int c = 0; c < dim_; ++c) os << (c ? "," : "") << lo_[c] << ':' << hi_[c];
      os << "]x" << resolution_;
      break;
    case Kind::Simplex:
      os << "simplex(" << dim_ << ')';
      break;
  }
  return os.str();
}

// ---------------------------------------------------------------------------

Vec ProblemSpec::b(double t, CVecRef y, CMatRef z, CVecRef v) const {
  Vec out(dims.n);
  drift(t, y, z, v, out);
  return out;
}

Mat ProblemSpec::b_y(double t, CVecRef y, CMatRef z, CVecRef v) const {
  Mat out(dims.n, dims.n);
  drift_dy(t, y, z, v, out);
  return out;
}

Mat ProblemSpec::b_z(double t, CVecRef y, CMatRef z, CVecRef v) const {
  Mat out(dims.n, dims.n * dims.d);
  drift_dz(t, y, z, v, out);
  return out;
}

Vec ProblemSpec::h_y(double t, CVecRef y, CMatRef z, CVecRef v) const {
  Vec out(dims.n);
  running_cost_dy(t, y, z, v, out);
  return out;
}

Mat ProblemSpec::h_z(double t, CVecRef y, CMatRef z, CVecRef v) const {
  Mat out(dims.n, dims.d);
  running_cost_dz(t, y, z, v, out);
  return out;
}

Vec ProblemSpec::g_y(CVecRef y) const {
  Vec out(dims.n);
  terminal_cost_dy(y, out);
  return out;
}

Vec ProblemSpec::xi(CVecRef w) const {
  Vec out(dims.n);
  terminal_value(w, out);
  return out;
}

// ---------------------------------------------------------------------------

ControlLaw::ControlLaw(ControlSet set, Rule rule, std::string label, bool time_only)
    : set_(std::move(set)), rule_(std::move(rule)), label_(std::move(label)), time_only_(time_only) {}

void ControlLaw::evaluate(int node, const PathView& path, VecOut out) const {
  rule_(node, path, out);
  if (!set_.contains(out, 1e-10)) {
    std::ostringstream os;
    os << "control law '" << label_ << "' left U at node " << node << " (value "
       << out.transpose() << ", U = " << set_.describe() << ")";
    throw ConfigError(os.str());
  }
}

Vec ControlLaw::operator()(int node, const PathView& path) const {
  Vec out(set_.dimension());
  evaluate(node, path, out);
  return out;
}

ControlLaw constant_law(const ControlSet& set, const Vec& value, std::string label) {
  if (!set.contains(value)) {
    std::ostringstream os;
    os << "constant control " << value.transpose() << " is not in U = " << set.describe();
    throw ConfigError(os.str());
  }
  if (label.empty()) {
    std::ostringstream os;
    os << "const:";
    for (int c = 0; c < value.size(); ++c) os << (c ? "," : "") << value[c];
    label = os.str();
  }
  return ControlLaw(
      set, [value](int, const PathView&, VecOut out) { out = value; }, std::move(label), true);
}

ControlLaw schedule_law(const ControlSet& set, std::vector<Vec> values, std::string label) {
  for (const auto& v : values) {
    if (!set.contains(v)) throw ConfigError("scheduled control value is not in U");
  }
  auto table = std::make_shared<const std::vector<Vec>>(std::move(values));
  return ControlLaw(
      set,
      [table](int node, const PathView&, VecOut out) {
        if (node < 0 || static_cast<std::size_t>(node) >= table->size()) {
          throw ConfigError("schedule has no value for node " + std::to_string(node));
        }
        out = (*table)[static_cast<std::size_t>(node)];
      },
      std::move(label), true);
}

// ---------------------------------------------------------------------------

std::vector<SamplePoint> sample_points(const ProblemSpec& spec, int count, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0xC0FFEE));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& dims = spec.dims;
  const auto& set = spec.controls;
  std::vector<SamplePoint> points;
  points.reserve(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    SamplePoint p;
    p.t = unit(rng);
    p.y = Vec(dims.n);
    for (int r = 0; r < dims.n; ++r) p.y[r] = 2.0 * normal(rng);
    p.z = Mat(dims.n, dims.d);
    for (int c = 0; c < dims.n * dims.d; ++c) p.z.data()[c] = normal(rng);
    p.v = Vec(set.dimension());
    switch (set.kind()) {
      case ControlSet::Kind::Atoms: {
        const auto& atoms = set.atom_list();
        std::uniform_int_distribution<std::size_t> pick(0, atoms.size() - 1);
        p.v = atoms[pick(rng)];
        break;
      }
      case ControlSet::Kind::Box:
        for (int c = 0; c < set.dimension(); ++c) {
          p.v[c] = set.lower()[c] + (set.upper()[c] - set.lower()[c]) * unit(rng);
        }
        break;
      case ControlSet::Kind::Simplex: {
        for (int c = 0; c < set.dimension(); ++c) p.v[c] = -std::log(1.0 - unit(rng));
        p.v /= p.v.sum();
        break;
      }
    }
    points.push_back(std::move(p));
  }
  return points;
}

double fd_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

namespace {

constexpr double kRelStep = 1e-6;

double step_for(double x) { return kRelStep * std::max(1.0, std::abs(x)); }

void record(ValidationReport& report, const std::string& name, double err) {
  auto& slot = report.max_relative_error[name];
  slot = std::max(slot, err);
  report.worst = std::max(report.worst, err);
}

// Largest |f| over probe points at the given radius; used to flag growth.
template <class F>
double probe_magnitude(const ProblemSpec& spec, const std::vector<SamplePoint>& points, double radius,
                       F&& f) {
  double worst = 0.0;
  for (const auto& p : points) {
    const Vec y = radius * p.y;
    const Mat z = radius * p.z;
    worst = std::max(worst, std::abs(f(p.t, y, z, p.v)));
  }
  (void)spec;
  return worst;
}

}  // namespace

ValidationReport validate_spec(const ProblemSpec& spec, int samples, std::uint64_t seed,
                               double tolerance) {
  spec.dims.validate();
  if (spec.controls.dimension() != spec.dims.k) {
    throw ConfigError("control set dimension does not match k");
  }
  const int n = spec.dims.n;
  const int d = spec.dims.d;
  ValidationReport report;
  const auto points = sample_points(spec, samples, seed);

  for (const auto& p : points) {
    const Mat by = spec.b_y(p.t, p.y, p.z, p.v);
    const Mat bz = spec.b_z(p.t, p.y, p.z, p.v);
    const Vec hy = spec.h_y(p.t, p.y, p.z, p.v);
    const Mat hz = spec.h_z(p.t, p.y, p.z, p.v);
    const Vec gy = spec.g_y(p.y);

    for (int j = 0; j < n; ++j) {
      const double step = step_for(p.y[j]);
      Vec up = p.y, dn = p.y;
      up[j] += step;
      dn[j] -= step;
      const Vec db = (spec.b(p.t, up, p.z, p.v) - spec.b(p.t, dn, p.z, p.v)) / (2.0 * step);
      for (int r = 0; r < n; ++r) record(report, "b_y", fd_relative_error(by(r, j), db[r]));
      const double dh = (spec.h(p.t, up, p.z, p.v) - spec.h(p.t, dn, p.z, p.v)) / (2.0 * step);
      record(report, "h_y", fd_relative_error(hy[j], dh));
      const double dg = (spec.g(up) - spec.g(dn)) / (2.0 * step);
      record(report, "g_y", fd_relative_error(gy[j], dg));
    }
    for (int c = 0; c < n * d; ++c) {
      const double step = step_for(p.z.data()[c]);
      Mat up = p.z, dn = p.z;
      up.data()[c] += step;
      dn.data()[c] -= step;
      const Vec db = (spec.b(p.t, p.y, up, p.v) - spec.b(p.t, p.y, dn, p.v)) / (2.0 * step);
      for (int r = 0; r < n; ++r) record(report, "b_z", fd_relative_error(bz(r, c), db[r]));
      const double dh = (spec.h(p.t, p.y, up, p.v) - spec.h(p.t, p.y, dn, p.v)) / (2.0 * step);
      record(report, "h_z", fd_relative_error(hz.data()[c], dh));
    }
  }

  for (const auto& [name, err] : report.max_relative_error) {
    if (err > tolerance) throw GradientMismatchError(name, err);
  }

  // Growth probe: coefficients that grow by more than 10x between radius 1
  // and radius 1e3 are flagged as unbounded.
  const auto probes = sample_points(spec, 32, seed ^ 0xB0B0ULL);
  auto flag = [&](const std::string& name, auto&& f) {
    const double near = probe_magnitude(spec, probes, 1.0, f);
    const double far = probe_magnitude(spec, probes, 1e3, f);
    if (far > 10.0 * (near + 1.0)) report.flags.push_back("unbounded " + name);
  };
  flag("b", [&](double t, const Vec& y, const Mat& z, const Vec& v) {
    return spec.b(t, y, z, v).norm();
  });
  flag("h", [&](double t, const Vec& y, const Mat& z, const Vec& v) { return spec.h(t, y, z, v); });
  flag("g", [&](double, const Vec& y, const Mat&, const Vec&) { return spec.g(y); });
  return report;
}

}  // namespace bsmp
