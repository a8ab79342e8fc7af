#include "bsmp/acceptance.hpp"
#include "bsmp/errors.hpp"
#include "bsmp/export.hpp"
#include "bsmp/problems.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bsmp;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

RunMetadata sample_meta() {
  RunMetadata meta;
  meta.command = "solve";
  meta.problem = "P2";
  meta.seed = 42;
  meta.steps = 4;
  meta.paths = 20;
  return meta;
}

}  // namespace

TEST(Export, FormatNumberRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678, 0.0}) {
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
}

TEST(Export, MetadataCarriesReplayFields) {
  const auto json = metadata_json(sample_meta());
  EXPECT_EQ(json.at("command"), "solve");
  EXPECT_EQ(json.at("problem"), "P2");
  EXPECT_EQ(json.at("seed"), 42);
  EXPECT_EQ(json.at("N"), 4);
  EXPECT_EQ(json.at("M"), 20);
  EXPECT_EQ(json.at("version"), kToolVersion);
}

TEST(Export, TrajectoryCsvShape) {
  const auto spec = get_problem("P2").spec;
  const auto bundle = sample_brownian(build_grid(1.0, 4), spec.dims, 20, 1);
  const auto law = constant_law(spec.controls, Vec::Constant(1, 1.0));
  const auto traj = solve_bsde(spec, law, bundle, RegressionConfig{1, -1.0});
  const auto lines = lines_of(trajectory_csv(traj, sample_meta(), 3));
  std::size_t header = 0;
  while (header < lines.size() && lines[header].rfind("# ", 0) == 0) ++header;
  ASSERT_GT(header, 0u);
  EXPECT_EQ(lines[header], "path,time_index,t,y_1,z_11");
  EXPECT_EQ(lines.size() - header - 1, 3u * 5u);
  EXPECT_EQ(lines.back().substr(0, 4), "2,4,");

  const auto all = lines_of(trajectory_csv(traj, sample_meta(), -1));
  EXPECT_EQ(all.size() - header - 1, 20u * 5u);
}

TEST(Export, AdjointCsvHeader) {
  const auto spec = get_problem("P2").spec;
  const auto bundle = sample_brownian(build_grid(1.0, 4), spec.dims, 20, 1);
  const auto law = constant_law(spec.controls, Vec::Constant(1, 1.0));
  const auto traj = solve_bsde(spec, law, bundle, RegressionConfig{1, -1.0});
  const auto text = adjoint_csv(solve_adjoint(spec, law, traj), sample_meta(), 1);
  EXPECT_NE(text.find("path,time_index,t,p_1\n"), std::string::npos);
}

TEST(Export, TableCsvUsesFirstRowColumns) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  rows.push_back({{"level", 4}, {"gap", 0.5}});
  rows.push_back({{"level", 16}, {"gap", 0.125}});
  const auto lines = lines_of(table_csv(rows, sample_meta()));
  EXPECT_EQ(lines[lines.size() - 3], "level,gap");
  EXPECT_EQ(lines.back(), "16,0.125");
}

TEST(Export, AtomicWriteReplacesContent) {
  const auto dir = std::filesystem::temp_directory_path() / "bsmp_export_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "out.txt").string();
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(content, "second");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) EXPECT_EQ(entry.path().filename(), "out.txt");
  std::filesystem::remove_all(dir);
}

TEST(Export, AtomicWriteCreatesParentsButFailsUnderAFile) {
  const auto dir = std::filesystem::temp_directory_path() / "bsmp_export_parent";
  std::filesystem::remove_all(dir);
  write_file_atomic((dir / "a" / "b.txt").string(), "nested");
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "b.txt"));
  try {
    write_file_atomic((dir / "a" / "b.txt" / "c.txt").string(), "data");
    std::filesystem::remove_all(dir);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
  std::filesystem::remove_all(dir);
}

TEST(Registry, FourteenCriteriaInOrder) {
  const auto& criteria = acceptance_criteria();
  ASSERT_EQ(criteria.size(), 14u);
  for (std::size_t j = 0; j < criteria.size(); ++j) {
    EXPECT_EQ(criteria[j].id, static_cast<int>(j + 1));
    EXPECT_FALSE(criteria[j].title.empty());
    EXPECT_TRUE(static_cast<bool>(criteria[j].run));
  }
}
