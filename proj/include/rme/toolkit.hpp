#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rme {

struct ToolkitEntry {
  std::string name;
  long trials = 0;      // inputs that met the side conditions and were evaluated
  long violations = 0;  // lhs > rhs beyond the relative slack
  double worst = 0.0;   // max (lhs - rhs) / max(1, |lhs|, |rhs|)
};

struct ToolkitReport {
  std::vector<ToolkitEntry> entries;
  bool pass() const {
    for (const auto& e : entries)
      if (e.violations > 0 || e.trials == 0) return false;
    return true;
  }
};

inline constexpr double kToolkitSlack = 1e-12;

// Each inequality at `trials` random inputs respecting its side conditions, plus its
// tight cases: Cauchy-Schwarz, Hoelder (k = 2, 4, 8, boolean w), AM-GM, Triangle,
// Cancellation, Square Root, the power-of-2 reduction, and the factored form
// (A)(B) >= 0 on random feasible 1-D assignments.
ToolkitReport toolkit_suite(long trials, std::uint64_t seed);

}  // namespace rme
