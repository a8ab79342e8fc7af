#include "bsmp/export.hpp"

#include "bsmp/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bsmp {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

nlohmann::ordered_json metadata_json(const RunMetadata& meta) {
  nlohmann::ordered_json j;
  j["tool"] = "bsmp";
  j["version"] = kToolVersion;
  j["command"] = meta.command;
  if (!meta.problem.empty()) j["problem"] = meta.problem;
  j["seed"] = meta.seed;
  j["N"] = meta.steps;
  j["M"] = meta.paths;
  j["D"] = meta.regression.degree;
  if (meta.regression.ridge < 0.0) {
    j["lambda"] = "auto";
  } else {
    j["lambda"] = meta.regression.ridge;
  }
  return j;
}

nlohmann::ordered_json to_json(const CostEstimate& cost) {
  return {{"value", cost.value}, {"stderr", cost.standard_error}, {"paths", cost.paths}};
}

namespace {

// JSON has no NaN; emit null for undefined quantities.
nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

nlohmann::ordered_json to_json(const ViolationReport& r) {
  nlohmann::ordered_json j;
  j["mean_gap"] = r.mean_gap;
  j["max_gap"] = r.max_gap;
  j["q50"] = r.q50;
  j["q90"] = r.q90;
  j["q99"] = r.q99;
  j["gap_stderr"] = r.gap_stderr;
  j["tolerance"] = r.tolerance;
  j["verdict"] = r.pass ? "pass" : "fail";
  j["resolution"] = r.blocks > 0 ? "blocks:" + std::to_string(r.blocks) : std::string("pointwise");
  j["samples"] = r.samples;
  if (r.support_mass) j["support_mass"] = *r.support_mass;
  auto worst = nlohmann::ordered_json::array();
  for (const auto& o : r.worst_per_node)
    worst.push_back({{"node", o.node}, {"path", o.path}, {"argmax_atom", o.atom}, {"gap", o.gap}});
  j["worst_per_node"] = std::move(worst);
  return j;
}

nlohmann::ordered_json to_json(const SufficiencyReport& r) {
  nlohmann::ordered_json j;
  j["convexity_defect"] = number_or_null(r.convexity_defect);
  j["concavity_defect"] = number_or_null(r.concavity_defect);
  j["linearity_defect"] = r.linearity_defect;
  j["control_set_convex"] = r.control_set_convex;
  j["samples"] = r.samples;
  j["verdict"] = r.pass ? "pass" : "fail";
  return j;
}

namespace {

void metadata_header(std::ostringstream& os, const RunMetadata& meta) {
  const auto fields = metadata_json(meta);
  for (const auto& [key, value] : fields.items()) {
    os << "# " << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << '\n';
  }
}

int path_limit(int paths, int max_paths) { return max_paths < 0 ? paths : std::min(paths, max_paths); }

}  // namespace

std::string trajectory_csv(const Trajectory& traj, const RunMetadata& meta, int max_paths) {
  std::ostringstream os;
  metadata_header(os, meta);
  const int n = traj.n();
  const int d = traj.d();
  os << "path,time_index,t";
  for (int j = 1; j <= n; ++j) os << ",y_" << j;
  for (int j = 1; j <= n; ++j)
    for (int l = 1; l <= d; ++l) os << ",z_" << j << l;
  os << '\n';
  const int paths = path_limit(traj.paths(), max_paths);
  for (int m = 0; m < paths; ++m) {
    for (int i = 0; i <= traj.steps(); ++i) {
      os << m << ',' << i << ',' << format_number(traj.grid().node(i));
      const auto y = traj.y(m, i);
      const auto z = traj.z(m, i);
      for (int j = 0; j < n; ++j) os << ',' << format_number(y[j]);
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < d; ++l) os << ',' << format_number(z(j, l));
      os << '\n';
    }
  }
  return os.str();
}

std::string adjoint_csv(const AdjointPath& adj, const RunMetadata& meta, int max_paths) {
  std::ostringstream os;
  metadata_header(os, meta);
  os << "path,time_index,t";
  for (int j = 1; j <= adj.n(); ++j) os << ",p_" << j;
  os << '\n';
  const auto& grid = adj.bundle().grid();
  const int paths = path_limit(adj.paths(), max_paths);
  for (int m = 0; m < paths; ++m) {
    for (int i = 0; i <= adj.steps(); ++i) {
      os << m << ',' << i << ',' << format_number(grid.node(i));
      const auto p = adj.p(m, i);
      for (int j = 0; j < adj.n(); ++j) os << ',' << format_number(p[j]);
      os << '\n';
    }
  }
  return os.str();
}

std::string table_csv(const nlohmann::ordered_json& rows, const RunMetadata& meta) {
  std::ostringstream os;
  metadata_header(os, meta);
  if (!rows.is_array() || rows.empty()) return os.str();
  std::vector<std::string> columns;
  for (const auto& [key, value] : rows.front().items()) columns.push_back(key);
  for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) os << ',';
      const auto& v = row.at(columns[c]);
      if (v.is_number_float()) {
        os << format_number(v.get<double>());
      } else if (v.is_string()) {
        os << v.get<std::string>();
      } else if (v.is_null()) {
        os << "nan";
      } else {
        os << v.dump();
      }
    }
    os << '\n';
  }
  return os.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
  const fs::path temp = target.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + temp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing '" + temp.string() + "'");
  }
  fs::rename(temp, target, ec);
  if (ec) {
    fs::remove(temp, ec);
    throw IoError("cannot move artifact into place at '" + path + "'");
  }
}

}  // namespace bsmp
