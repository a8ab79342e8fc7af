#pragma once

#include "bsmp/regression.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace bsmp {

struct SuiteSettings {
  std::uint64_t seed = 7;
  int steps = 64;
  int paths = 20000;
  RegressionConfig regression;
  /// Fine grid used by the deterministic chattering and oracle checks.
  int fine_steps = 1024;
  /// Path cap on the fine grid; those problems are deterministic.
  int fine_paths = 2000;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string summary;   ///< one line
  std::string artifact;  ///< JSON document
};

/// Artifacts from earlier criteria of the same run, keyed by id.
struct SuiteContext {
  std::map<int, std::string> artifacts;
};

struct Criterion {
  int id = 0;
  std::string title;
  std::function<CriterionResult(const SuiteSettings&, SuiteContext&)> run;
};

const std::vector<Criterion>& acceptance_criteria();

/// Runs the criteria whose ids are in `only` (all when empty), in id order.
std::vector<CriterionResult> run_suite(const SuiteSettings& settings, const std::vector<int>& only = {},
                                       const std::function<void(const CriterionResult&)>& on_result = {});

}  // namespace bsmp
