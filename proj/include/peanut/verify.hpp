#pragma once

#include "peanut/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace peanut {

struct SuiteResult {
  std::string name;
  bool passed = false;
  Index cases = 0;
  /// The failing property, or a short summary when passed.
  std::string detail;
};

struct VerifyOptions {
  /// Empty runs every suite.
  std::vector<std::string> suites;
  std::uint64_t seed = 0;
  /// Test hook: corrupts every checked quantity so that all suites fail.
  bool inject_fault = false;
};

/// budget, eigensolver, optimality, closed-form, cauchy-schwarz, gradients, discrete.
const std::vector<std::string>& suite_names();

/// Runs the selected oracle suites; throws InvalidArgument for an unknown suite name.
std::vector<SuiteResult> run_verification(const VerifyOptions& opts);

SuiteResult verify_budget(const VerifyOptions& opts);
SuiteResult verify_eigensolver(const VerifyOptions& opts);
SuiteResult verify_optimality(const VerifyOptions& opts);
SuiteResult verify_closed_form(const VerifyOptions& opts);
SuiteResult verify_cauchy_schwarz(const VerifyOptions& opts);
SuiteResult verify_gradients(const VerifyOptions& opts);
SuiteResult verify_discrete(const VerifyOptions& opts);

}  // namespace peanut
