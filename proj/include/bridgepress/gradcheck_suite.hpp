#pragma once

#include <string>
#include <vector>

#include "bridgepress/gradcheck.hpp"

namespace bridgepress {

struct GradcheckCase {
  std::string module;
  std::string name;
  GradcheckReport report;
  bool passed = false;
};

/// tensorcore, ils, losses, models
const std::vector<std::string>& gradcheck_modules();

/// Runs every finite-difference case of `module` (all modules when empty).
/// Throws ConfigError for an unknown module name.
std::vector<GradcheckCase> run_gradcheck_suite(const std::string& module = "",
                                               double tolerance = 1e-4);

}  // namespace bridgepress
