#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace taskuq {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct AcceptanceOptions {
  std::uint64_t seed = 20260823;
  int trials = 2000;  // Monte-Carlo trials; tolerances scale with 1/sqrt(trials)
  int workers = 4;
};

// Runs the full acceptance suite on the synthetic testbed. Each criterion
// reports pass/fail with the measured values; nothing is asserted that was
// not computed here.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts);

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace taskuq
