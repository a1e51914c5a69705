#pragma once

#include <string>
#include <vector>

namespace spectralflow {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;  // measured quantity vs bound, for the report line
};

// Runs the built-in invariant suite with deterministic seeding. Covers the
// activation derivatives, ambient potential gradients, velocity tangency and
// constraint orthogonality, transport distance axioms against brute force,
// finite-difference eigenvalue convergence order, and mollifier table sanity.
std::vector<CheckResult> run_invariant_checks(std::uint64_t seed);

// True when every entry passed.
bool all_passed(const std::vector<CheckResult>& results);

// One line per check: "PASS name: detail" / "FAIL name: detail".
std::string format_check_report(const std::vector<CheckResult>& results);

}  // namespace spectralflow
